#pragma once

#include <stdexcept>
#include <string>

namespace sracp {

/// Malformed or inconsistent wire data (bad magic, hash mismatch, truncation).
class ProtocolError : public std::runtime_error {
  public:
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

/// A payload would exceed the active byte budget.
class BudgetError : public std::runtime_error {
  public:
    explicit BudgetError(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration or scene file failed validation.
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sracp
