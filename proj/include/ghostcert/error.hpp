#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace ghostcert {

// Argument outside the mathematical domain of an operation (p ∉ (0,1), k > n, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Two arrays that must agree in shape do not.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or truncated file. Carries the byte offset when one is meaningful.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what,
                       std::optional<std::uint64_t> offset = std::nullopt)
      : std::runtime_error(offset ? what + " (at byte " + std::to_string(*offset) + ")"
                                  : what),
        offset_(offset) {}

  std::optional<std::uint64_t> offset() const { return offset_; }

 private:
  std::optional<std::uint64_t> offset_;
};

// Invalid configuration value or document.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : std::invalid_argument(what), key_(std::move(key)) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Operation not supported by the given object (e.g. GradCAM on a model without conv layers).
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ghostcert
