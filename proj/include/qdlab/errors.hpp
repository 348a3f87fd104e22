#pragma once

#include <stdexcept>
#include <string>

namespace qdlab {

/// Input outside the mathematical domain of an operation (bad length, point off the collar, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A computation could not be carried out to the requested accuracy
/// (under-resolved grid, overflow outside the log-domain path, zero denominator).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qdlab
