#pragma once

#include <stdexcept>
#include <string>

namespace cellph {

// Each error family maps to its own CLI exit code.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invariant breach inside a solver (e.g. objective increase in gamma mode).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cellph
