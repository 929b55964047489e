#pragma once

#include <stdexcept>
#include <string>

namespace sfm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration or schema violation (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sfm
