#pragma once

#include <stdexcept>
#include <string>

namespace mcmps {

// Exit-code mapping used by the CLI: ConfigError -> 1, NumericError -> 2,
// ResourceError -> 3.

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Broken internal invariant (bond mismatch, impossible sampler branch).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace mcmps
