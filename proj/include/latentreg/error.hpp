#pragma once

#include <stdexcept>
#include <string>

namespace latentreg {

/// Invalid input or configuration. The CLI maps this to exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical or I/O failure during computation. The CLI maps this to exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace latentreg
