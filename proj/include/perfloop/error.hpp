#pragma once

#include <stdexcept>
#include <string>

namespace perfloop {

// Base of every error raised by the toolkit. The gateway maps these onto
// exit codes and HTTP status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input documents (span streams, model documents, config files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid models: dangling references, broken invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A named element (component, operation, scenario, session) does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

// A numeric value outside its admissible range.
class RangeError : public Error {
 public:
  using Error::Error;
};

}  // namespace perfloop
