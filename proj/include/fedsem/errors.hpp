#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fedsem {

/// Invalid configuration: bad shapes, out-of-range hyperparameters, unknown keys.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An API was called out of contract (missing tape, mismatched gradient list).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The federated protocol cannot proceed, e.g. a round with no participants.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The epoch budget cannot be distributed under the per-client cap.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated file. `offset()` is the byte position where parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace fedsem
