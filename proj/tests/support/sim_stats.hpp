#pragma once

#include <map>
#include <string>

#include "perfloop/sysmock_sim.hpp"

namespace simstats {

// Time-weighted mean utilization of one instance over all windows.
inline double mean_utilization(const perfloop::sim::SimOutput& out, const std::string& instance) {
  double num = 0.0, den = 0.0;
  for (const auto& s : out.utilization) {
    if (s.service_name != instance) continue;
    auto dt = static_cast<double>(s.window_end - s.window_start);
    num += s.utilization * dt;
    den += dt;
  }
  return den > 0.0 ? num / den : 0.0;
}

// Mean duration of root spans, seconds.
inline double mean_root_duration(const perfloop::sim::SimOutput& out) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : out.spans) {
    if (s.parent_id) continue;
    sum += static_cast<double>(s.duration) * 1e-6;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

inline std::map<std::string, std::size_t> spans_per_service(const perfloop::sim::SimOutput& out) {
  std::map<std::string, std::size_t> m;
  for (const auto& s : out.spans) ++m[s.service_name];
  return m;
}

}  // namespace simstats
