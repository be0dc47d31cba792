#define OPENSSL_SUPPRESS_DEPRECATED
#include "spamfriction/pow.hpp"

#include <openssl/sha.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>

namespace spamfriction::pow {

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

unsigned parse_small(std::string_view field, const char* what) {
  if (!all_digits(field)) throw WireFormatError(std::string(what) + " is not a decimal number");
  if (field.size() > 1 && field[0] == '0') throw WireFormatError(std::string(what) + " has leading zeros");
  unsigned value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    throw WireFormatError(std::string(what) + " overflows");
  return value;
}

std::vector<std::string_view> split_fields(std::string_view wire) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = wire.find(':', start);
    fields.push_back(wire.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

Puzzle puzzle_from_fields(std::string_view alg, std::string_view diff, std::string_view nonce) {
  Puzzle p;
  p.algorithm = parse_small(alg, "algorithm");
  p.difficulty = parse_small(diff, "difficulty");
  if (p.difficulty > kMaxDifficulty) throw WireFormatError("difficulty exceeds 64 bits");
  validate_nonce(nonce);
  p.nonce = std::string(nonce);
  return p;
}

std::string prefix_of(const Puzzle& p) {
  return std::to_string(p.algorithm) + ':' + std::to_string(p.difficulty) + ':' + p.nonce + ':';
}

Algorithm checked_algorithm(unsigned id) {
  if (!is_supported(id)) throw std::invalid_argument("unsupported puzzle algorithm " + std::to_string(id));
  return static_cast<Algorithm>(id);
}

}  // namespace

bool is_supported(unsigned algorithm_id) { return algorithm_id <= 2; }

std::vector<unsigned> supported_algorithms() { return {0, 1, 2}; }

void validate_nonce(std::string_view nonce) {
  if (nonce.empty()) throw WireFormatError("nonce is empty");
  if (nonce.size() > kMaxNonceLength) throw WireFormatError("nonce longer than 64 digits");
  if (!all_digits(nonce)) throw WireFormatError("nonce contains non-digit characters");
}

std::string format_puzzle(const Puzzle& p) {
  return std::to_string(p.algorithm) + ':' + std::to_string(p.difficulty) + ':' + p.nonce;
}

std::string format_receipt(const Receipt& r) { return format_puzzle(r.puzzle) + ':' + r.solution; }

Puzzle parse_puzzle(std::string_view wire) {
  auto f = split_fields(wire);
  if (f.size() != 3) throw WireFormatError("puzzle needs 3 fields, got " + std::to_string(f.size()));
  return puzzle_from_fields(f[0], f[1], f[2]);
}

Receipt parse_receipt(std::string_view wire) {
  auto f = split_fields(wire);
  if (f.size() != 4) throw WireFormatError("receipt needs 4 fields, got " + std::to_string(f.size()));
  Receipt r;
  r.puzzle = puzzle_from_fields(f[0], f[1], f[2]);
  if (!all_digits(f[3])) throw WireFormatError("solution is not a decimal number");
  r.solution = std::string(f[3]);
  return r;
}

unsigned leading_zero_bits(std::span<const unsigned char> digest) {
  unsigned bits = 0;
  for (unsigned char b : digest) {
    if (b == 0) {
      bits += 8;
      continue;
    }
    bits += static_cast<unsigned>(std::countl_zero(b));
    break;
  }
  return bits;
}

std::vector<unsigned char> receipt_digest(const Puzzle& puzzle, std::string_view solution) {
  const std::string input = prefix_of(puzzle) + std::string(solution);
  const auto* bytes = reinterpret_cast<const unsigned char*>(input.data());
  switch (checked_algorithm(puzzle.algorithm)) {
    case Algorithm::Sha256: {
      std::vector<unsigned char> out(SHA256_DIGEST_LENGTH);
      SHA256(bytes, input.size(), out.data());
      return out;
    }
    case Algorithm::DoubleSha256: {
      unsigned char inner[SHA256_DIGEST_LENGTH];
      SHA256(bytes, input.size(), inner);
      std::vector<unsigned char> out(SHA256_DIGEST_LENGTH);
      SHA256(inner, sizeof inner, out.data());
      return out;
    }
    case Algorithm::Sha512: {
      std::vector<unsigned char> out(SHA512_DIGEST_LENGTH);
      SHA512(bytes, input.size(), out.data());
      return out;
    }
  }
  return {};
}

bool verify_hash(const Puzzle& puzzle, std::string_view solution) {
  if (!is_supported(puzzle.algorithm) || puzzle.difficulty > kMaxDifficulty) return false;
  if (puzzle.difficulty == 0) return true;
  return leading_zero_bits(receipt_digest(puzzle, solution)) >= puzzle.difficulty;
}

struct PrefixHasher::State {
  SHA256_CTX sha256;
  SHA512_CTX sha512;
};

PrefixHasher::PrefixHasher(const Puzzle& puzzle)
    : algorithm_(checked_algorithm(puzzle.algorithm)), difficulty_(puzzle.difficulty), state_(std::make_unique<State>()) {
  const std::string prefix = prefix_of(puzzle);
  if (algorithm_ == Algorithm::Sha512) {
    SHA512_Init(&state_->sha512);
    SHA512_Update(&state_->sha512, prefix.data(), prefix.size());
  } else {
    SHA256_Init(&state_->sha256);
    SHA256_Update(&state_->sha256, prefix.data(), prefix.size());
  }
}

PrefixHasher::PrefixHasher(const PrefixHasher& other)
    : algorithm_(other.algorithm_), difficulty_(other.difficulty_), state_(std::make_unique<State>(*other.state_)) {}

PrefixHasher::~PrefixHasher() = default;

unsigned PrefixHasher::zero_bits(std::uint64_t counter) const {
  char buf[24];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, counter);
  const auto len = static_cast<std::size_t>(end - buf);

  switch (algorithm_) {
    case Algorithm::Sha256: {
      SHA256_CTX ctx = state_->sha256;
      unsigned char out[SHA256_DIGEST_LENGTH];
      SHA256_Update(&ctx, buf, len);
      SHA256_Final(out, &ctx);
      return leading_zero_bits(out);
    }
    case Algorithm::DoubleSha256: {
      SHA256_CTX ctx = state_->sha256;
      unsigned char inner[SHA256_DIGEST_LENGTH];
      unsigned char out[SHA256_DIGEST_LENGTH];
      SHA256_Update(&ctx, buf, len);
      SHA256_Final(inner, &ctx);
      SHA256(inner, sizeof inner, out);
      return leading_zero_bits(out);
    }
    case Algorithm::Sha512: {
      SHA512_CTX ctx = state_->sha512;
      unsigned char out[SHA512_DIGEST_LENGTH];
      SHA512_Update(&ctx, buf, len);
      SHA512_Final(out, &ctx);
      return leading_zero_bits(out);
    }
  }
  return 0;
}

}  // namespace spamfriction::pow
