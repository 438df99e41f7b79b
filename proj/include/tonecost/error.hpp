#pragma once

#include <stdexcept>
#include <string>

namespace tonecost {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or missing configuration. CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A provider call failed at the transport or protocol level.
class ProviderError : public Error {
 public:
  using Error::Error;
};

// Retry budget spent without a usable response. CLI exit code 3.
class ProviderExhausted : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

// Estimation cannot proceed (rank deficiency, empty subset, broken pairing).
// CLI exit code 4.
class EstimationError : public Error {
 public:
  using Error::Error;
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int provider = 3;
inline constexpr int estimation = 4;
}  // namespace exit_code

}  // namespace tonecost
