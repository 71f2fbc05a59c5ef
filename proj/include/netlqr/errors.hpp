#pragma once

#include <stdexcept>
#include <string>

namespace netlqr {

/// Malformed or inconsistent input: bad dimensions, invalid probabilities,
/// unparseable configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A region/candidate budget or an enumeration cap was exceeded.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factorization failed or a value matrix lost positive semidefiniteness.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace netlqr
