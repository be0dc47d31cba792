#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "spamfriction/pow.hpp"

namespace spamfriction::pow {

// 64-bit entropy source used for server nonces.
using EntropySource = std::function<std::uint64_t()>;

// Draws from std::random_device.
EntropySource system_entropy();

enum class VerifyOutcome {
  Accepted,
  UnknownNonce,
  Expired,
  Replayed,
  BadSolution,
};

const char* to_string(VerifyOutcome outcome);

// Issued puzzles keyed by nonce. A nonce verifies at most once, and never
// after its expiry. Safe for concurrent issue and verify.
class PuzzleStore {
 public:
  explicit PuzzleStore(std::size_t capacity = 100000);

  // Registers a freshly issued puzzle. When full, the entry with the oldest
  // expiry among the already-expired ones is evicted; returns false if none
  // has expired (overload) or the nonce is already present.
  bool insert(const Puzzle& puzzle, TimePoint now);

  VerifyOutcome verify(const Receipt& receipt, TimePoint now);

  // Drops an entry so it can never verify.
  void revoke(std::string_view nonce);

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  bool contains(std::string_view nonce) const;

 private:
  struct Entry {
    Puzzle puzzle;
    bool consumed = false;
  };

  bool evict_one_expired(TimePoint now);

  mutable std::mutex mu_;
  std::size_t capacity_;
  std::unordered_map<std::string, Entry> entries_;
  std::multimap<TimePoint, std::string> by_expiry_;
};

class IssuanceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Number of decimal digits in a generated nonce.
inline constexpr int kNonceDigits = 18;

// Issues a puzzle with a fresh random nonce and registers it in the store.
// Throws std::invalid_argument for difficulty > 64 or ttl <= 0 and
// IssuanceError when the store is full of unexpired puzzles.
Puzzle generate_challenge(unsigned algorithm, unsigned difficulty, Duration ttl, const EntropySource& entropy,
                          TimePoint now, PuzzleStore& store);

// max(3600 s, 2 * expected solve time + 600 s) for a solver running at
// hashes_per_second.
Duration default_ttl(unsigned difficulty, double hashes_per_second);

}  // namespace spamfriction::pow
