#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spamfriction/clock.hpp"

namespace spamfriction::pow {

inline constexpr unsigned kMaxDifficulty = 64;
inline constexpr std::size_t kMaxNonceLength = 64;

// Puzzle algorithm ids. ALG0 is the mandatory baseline; 1 and 2 are optional
// hash variants so the capability list in EHLO describes real code.
enum class Algorithm : unsigned {
  Sha256 = 0,        // ALG0: SHA-256 partial preimage
  DoubleSha256 = 1,  // ALG1: SHA-256(SHA-256(x))
  Sha512 = 2,        // ALG2: SHA-512 partial preimage
};

bool is_supported(unsigned algorithm_id);
std::vector<unsigned> supported_algorithms();

class WireFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Puzzle {
  unsigned algorithm = 0;
  unsigned difficulty = 0;
  std::string nonce;
  // Not carried on the wire; only meaningful for puzzles held by the issuer.
  TimePoint issued_at{};
  TimePoint expires_at{};

  bool same_challenge(const Puzzle& other) const {
    return algorithm == other.algorithm && difficulty == other.difficulty && nonce == other.nonce;
  }
};

struct Receipt {
  Puzzle puzzle;
  std::string solution;
};

// Wire forms, ASCII, no whitespace:
//   puzzle  <alg>:<difficulty>:<nonce>
//   receipt <alg>:<difficulty>:<nonce>:<solution>
std::string format_puzzle(const Puzzle& p);
std::string format_receipt(const Receipt& r);
Puzzle parse_puzzle(std::string_view wire);
Receipt parse_receipt(std::string_view wire);

// Throws WireFormatError if the nonce is empty, too long, or has non-digits.
void validate_nonce(std::string_view nonce);

unsigned leading_zero_bits(std::span<const unsigned char> digest);

// Digest of the ASCII bytes "<alg>:<difficulty>:<nonce>:<solution>" under the
// puzzle's algorithm. Throws std::invalid_argument for unknown algorithms.
std::vector<unsigned char> receipt_digest(const Puzzle& puzzle, std::string_view solution);

// True iff the receipt digest has at least puzzle.difficulty leading zero bits.
// Unknown algorithms never verify.
bool verify_hash(const Puzzle& puzzle, std::string_view solution);

// Hashes "<prefix><counter>" for many counters with the prefix absorbed once.
class PrefixHasher {
 public:
  explicit PrefixHasher(const Puzzle& puzzle);
  ~PrefixHasher();
  PrefixHasher(const PrefixHasher&);
  PrefixHasher& operator=(const PrefixHasher&) = delete;

  // Leading zero bits of the digest for this counter.
  unsigned zero_bits(std::uint64_t counter) const;
  bool satisfies(std::uint64_t counter) const { return zero_bits(counter) >= difficulty_; }

 private:
  struct State;
  Algorithm algorithm_;
  unsigned difficulty_;
  std::unique_ptr<State> state_;
};

}  // namespace spamfriction::pow
