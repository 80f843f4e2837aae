#pragma once

#include <stdexcept>
#include <string>

namespace relayrd {

// Raised when a requested distortion budget cannot be met by any channel
// admitted by the current cardinality caps.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

// Raised on malformed configuration input; message carries line/field context.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace relayrd
