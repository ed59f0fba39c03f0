#pragma once

#include <stdexcept>
#include <string>

namespace ice {

// Bad arguments or violated preconditions (shape mismatch, label out of
// range, invalid batch spec).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Input that has no usable numeric answer: zero-norm vectors, all-zero
// weights, non-finite values.
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ice
