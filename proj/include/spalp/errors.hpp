#pragma once

#include <stdexcept>
#include <string>

namespace spalp {

// Requested mixture has more components than there are data points.
class ModelTooLargeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation called on an object whose current state cannot satisfy it.
class InvalidStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad experiment configuration; the message names the offending key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failure while reading or writing experiment artifacts.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spalp
