#pragma once

#include <stdexcept>

namespace flowconv {

/// Operand dimensions disagree.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// An index (region, interval) lies outside its axis.
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// A forward or loss value became NaN/Inf.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A file did not match its binary or text layout.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace flowconv
