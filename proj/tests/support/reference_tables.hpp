#pragma once

// Literal probabilities and reported occurrence probabilities of six
// published detection tables, three model columns each (initial, driven
// action, random action).

#include <array>
#include <string>
#include <vector>

namespace reference {

struct Column {
  std::vector<double> literals;  // Blob: connects, msgs, util. PaF: demand, util.
  double reported = 0.0;
};

struct Table {
  std::string name;
  bool blob = true;
  std::array<Column, 3> columns;
};

inline const std::vector<Table>& tables() {
  static const std::vector<Table> t{
      {"eshopper blob web", true, {{{{1, 1, .80}, .80}, {{1, 1, .39}, .39}, {{1, 1, 1}, 1}}}},
      {"eshopper blob items", true, {{{{.5, .5, 1}, .25}, {{.25, .25, 1}, .06}, {{.5, .5, 1}, .25}}}},
      {"eshopper paf web/categories", false, {{{{1, .80}, .80}, {{1, .39}, .39}, {{1, 1}, 1}}}},
      {"trainticket paf verification-code/generate", false, {{{{.88, .91}, .80}, {{.88, 0}, 0}, {{.88, .98}, .87}}}},
      {"trainticket blob rebook", true, {{{{.5, 1, .92}, .46}, {{.5, 1, .24}, .12}, {{.5, 1, .93}, .46}}}},
      {"trainticket blob verification-code", true, {{{{.5, 1, .91}, .45}, {{0, 0, 0}, 0}, {{1, 1, .98}, .98}}}},
  };
  return t;
}

}  // namespace reference
