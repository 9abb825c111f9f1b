#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace circpred {

/// Coarse failure classes. The CLI maps each to a distinct exit code and
/// prints the category name so callers can branch on it.
enum class ErrorCategory {
  config,    // invalid parameters or infeasible alpha
  data,      // malformed input files, bad CSV rows, non-monotone timestamps
  domain,    // mathematical domain violations (atan at the origin, sigma <= 0)
  io,        // filesystem failures
};

std::string_view category_name(ErrorCategory c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorCategory::domain, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCategory::io, what) {}
};

}  // namespace circpred
