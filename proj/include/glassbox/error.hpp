#pragma once

#include <stdexcept>
#include <string>

namespace glassbox {

// Bad input data, missing files, malformed checkpoints, diverging training.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments or configuration supplied by the caller.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace glassbox
