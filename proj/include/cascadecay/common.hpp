#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cascadecay {

inline constexpr const char* kToolName = "cascadecay";
inline constexpr const char* kToolVersion = "0.1.0";

using UserId = std::uint64_t;
using MessageId = std::uint64_t;

// Directed follow relation: `follower` subscribes to `followee`, so messages
// flow followee -> follower.
struct FollowEdge {
  UserId followee = 0;
  UserId follower = 0;
  friend auto operator<=>(const FollowEdge&, const FollowEdge&) = default;
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed for an independent RNG stream derived from a master seed.
constexpr std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed ^ 0xd1b54a32d192ed03ull) + stream);
}

struct FollowEdgeHash {
  std::size_t operator()(const FollowEdge& e) const {
    return static_cast<std::size_t>(
        splitmix64(splitmix64(e.followee) ^ (e.follower + 0x9e3779b97f4a7c15ull)));
  }
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or parameters (bad time unit, infeasible edge count, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or incompatible input data (bad records, header mismatch, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Argument outside an operation's stated domain (e.g. tau < 1).
class DomainError : public Error {
 public:
  using Error::Error;
};

// An operation had no matching inputs to work with.
class EmptyResultError : public Error {
 public:
  using Error::Error;
};

}  // namespace cascadecay
