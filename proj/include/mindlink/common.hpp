#pragma once

#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mindlink {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Precondition violated by a caller-supplied value.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sampling rate cannot represent the requested harmonic content.
class AliasingError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Filter specification cannot be realized.
class DesignError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Input carries no variance to correlate (flat channels, constant rows).
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Session configuration failed validation. `field()` is the dotted path of
/// the offending entry, e.g. "decoder.n_subbands".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// splitmix64 finalizer. Used for every seed derivation in the project so
/// that (seed, index) pairs map to well-separated generator states.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` under `seed`: mix64(seed ^ mix64(index)).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(seed ^ mix64(index));
}

}  // namespace mindlink
