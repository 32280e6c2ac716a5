#pragma once

#include <stdexcept>
#include <string>

namespace csc {

// Data or validation failure: malformed input files, contract violations.
// The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: non-finite loss, activation, or undefined cosine.
// The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace csc
