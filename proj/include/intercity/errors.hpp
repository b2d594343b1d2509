#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace intercity {

/// Malformed or inconsistent model configuration (unknown names, missing
/// attributes, identification rules).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation was invoked outside its domain (unavailable alternative,
/// empty choice set, zero denominator).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite utility, probability or gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Aggregated validation failure. Every problem found is kept in `messages()`.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> messages)
      : std::runtime_error(join(messages)), messages_(std::move(messages)) {}

  const std::vector<std::string>& messages() const noexcept { return messages_; }

 private:
  static std::string join(const std::vector<std::string>& messages) {
    std::string out = std::to_string(messages.size()) + " validation error(s)";
    for (const auto& m : messages) {
      out += "\n  - ";
      out += m;
    }
    return out;
  }

  std::vector<std::string> messages_;
};

}  // namespace intercity
