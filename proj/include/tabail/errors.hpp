#pragma once

#include <stdexcept>
#include <string>

namespace tabail {

// Shape and precondition violations throw std::invalid_argument. The types
// below cover the remaining failure classes.

/// Inconsistent input data, e.g. a demonstrator that is not deterministic.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration. The message starts with the field path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Environment interaction beyond the granted episode budget.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tabail
