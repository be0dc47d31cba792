#include "spamfriction/puzzle_store.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace spamfriction::pow {

EntropySource system_entropy() {
  auto device = std::make_shared<std::random_device>();
  auto mu = std::make_shared<std::mutex>();
  return [device, mu]() {
    std::lock_guard lock(*mu);
    return (static_cast<std::uint64_t>((*device)()) << 32) | (*device)();
  };
}

const char* to_string(VerifyOutcome outcome) {
  switch (outcome) {
    case VerifyOutcome::Accepted: return "accepted";
    case VerifyOutcome::UnknownNonce: return "unknown-nonce";
    case VerifyOutcome::Expired: return "expired";
    case VerifyOutcome::Replayed: return "replayed";
    case VerifyOutcome::BadSolution: return "bad-solution";
  }
  return "?";
}

PuzzleStore::PuzzleStore(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("puzzle store capacity must be positive");
}

bool PuzzleStore::evict_one_expired(TimePoint now) {
  auto it = by_expiry_.begin();
  if (it == by_expiry_.end() || it->first > now) return false;
  entries_.erase(it->second);
  by_expiry_.erase(it);
  return true;
}

bool PuzzleStore::insert(const Puzzle& puzzle, TimePoint now) {
  std::lock_guard lock(mu_);
  if (entries_.contains(puzzle.nonce)) return false;
  if (entries_.size() >= capacity_ && !evict_one_expired(now)) return false;
  entries_.emplace(puzzle.nonce, Entry{puzzle, false});
  by_expiry_.emplace(puzzle.expires_at, puzzle.nonce);
  return true;
}

VerifyOutcome PuzzleStore::verify(const Receipt& receipt, TimePoint now) {
  // Hash outside the lock; the entry check below is the commit point.
  const bool hash_ok = verify_hash(receipt.puzzle, receipt.solution);

  std::lock_guard lock(mu_);
  auto it = entries_.find(receipt.puzzle.nonce);
  if (it == entries_.end()) return VerifyOutcome::UnknownNonce;
  Entry& entry = it->second;
  if (entry.consumed) return VerifyOutcome::Replayed;
  if (now >= entry.puzzle.expires_at) return VerifyOutcome::Expired;
  if (!entry.puzzle.same_challenge(receipt.puzzle) || !hash_ok) return VerifyOutcome::BadSolution;
  entry.consumed = true;
  return VerifyOutcome::Accepted;
}

void PuzzleStore::revoke(std::string_view nonce) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(std::string(nonce));
  if (it == entries_.end()) return;
  auto [lo, hi] = by_expiry_.equal_range(it->second.puzzle.expires_at);
  for (auto e = lo; e != hi; ++e) {
    if (e->second == it->first) {
      by_expiry_.erase(e);
      break;
    }
  }
  entries_.erase(it);
}

std::size_t PuzzleStore::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

bool PuzzleStore::contains(std::string_view nonce) const {
  std::lock_guard lock(mu_);
  return entries_.contains(std::string(nonce));
}

Puzzle generate_challenge(unsigned algorithm, unsigned difficulty, Duration ttl, const EntropySource& entropy,
                          TimePoint now, PuzzleStore& store) {
  if (difficulty > kMaxDifficulty) throw std::invalid_argument("difficulty exceeds 64 bits");
  if (ttl <= Duration::zero()) throw std::invalid_argument("ttl must be positive");
  if (!is_supported(algorithm)) throw std::invalid_argument("unsupported puzzle algorithm");

  constexpr std::uint64_t kLow = 100'000'000'000'000'000ULL;  // 10^17
  constexpr std::uint64_t kSpan = 9 * kLow;                   // [10^17, 10^18)

  Puzzle p;
  p.algorithm = algorithm;
  p.difficulty = difficulty;
  p.issued_at = now;
  p.expires_at = now + ttl;
  // A duplicate nonce is astronomically unlikely; retry a few times to tell
  // it apart from a full store.
  for (int attempt = 0; attempt < 4; ++attempt) {
    p.nonce = std::to_string(kLow + entropy() % kSpan);
    if (store.insert(p, now)) return p;
    if (!store.contains(p.nonce)) break;
  }
  throw IssuanceError("puzzle store full of unexpired puzzles");
}

Duration default_ttl(unsigned difficulty, double hashes_per_second) {
  constexpr double kFloor = 3600.0;
  if (!(hashes_per_second > 0.0)) return from_seconds(kFloor);
  const double expected = std::ldexp(1.0, static_cast<int>(difficulty)) / hashes_per_second;
  // Capped at ~30 years so absurd difficulties cannot overflow the clock.
  return from_seconds(std::min(1e9, std::max(kFloor, 2.0 * expected + 600.0)));
}

}  // namespace spamfriction::pow
