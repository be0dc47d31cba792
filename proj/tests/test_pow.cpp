#include <openssl/evp.h>

#include <algorithm>
#include <random>

#include "doctest.h"
#include "spamfriction/pow.hpp"
#include "spamfriction/solver.hpp"

using namespace spamfriction;
using namespace spamfriction::pow;

namespace {

// One-shot EVP digest of the full receipt string; shares nothing with the
// midstate hasher under test.
std::vector<unsigned char> evp_digest(unsigned alg, const std::string& text) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  const EVP_MD* md = alg == 2 ? EVP_sha512() : EVP_sha256();
  EVP_Digest(text.data(), text.size(), out, &len, md, nullptr);
  if (alg == 1) EVP_Digest(out, len, out, &len, EVP_sha256(), nullptr);
  return {out, out + len};
}

Puzzle puzzle(unsigned alg, unsigned d, std::string nonce) { return Puzzle{alg, d, std::move(nonce), {}, {}}; }

}  // namespace

TEST_CASE("puzzle wire form parses the documented example") {
  auto p = parse_puzzle("0:21:892734982734987");
  CHECK(p.algorithm == 0);
  CHECK(p.difficulty == 21);
  CHECK(p.nonce == "892734982734987");
  CHECK(format_puzzle(p) == "0:21:892734982734987");

  auto r = parse_receipt("0:21:892734982734987:193287436879263");
  CHECK(r.puzzle.nonce == "892734982734987");
  CHECK(r.solution == "193287436879263");
  CHECK(format_receipt(r) == "0:21:892734982734987:193287436879263");
}

TEST_CASE("malformed wire strings are rejected") {
  for (const char* bad : {"0:21", "", "0:21:", ":21:1", "0::1", "0:21:12a", "0:65:1", "a:1:1", "0:21:1:2",
                          "00:21:1", "0:021:1", "0:21:1 ", " 0:21:1", "-1:2:3", "0:99999999999:1"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_puzzle(bad), WireFormatError);
  }
  CHECK_THROWS_AS(parse_puzzle("0:1:" + std::string(65, '7')), WireFormatError);
  CHECK_NOTHROW(parse_puzzle("0:64:" + std::string(64, '7')));
  for (const char* bad : {"0:21:1", "0:21:1:", "0:21:1:x", "0:21:1:2:3", "0:21:1:-2"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_receipt(bad), WireFormatError);
  }
}

TEST_CASE("parse and format round-trip for random puzzles and receipts") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 5000; ++i) {
    Puzzle p;
    p.algorithm = static_cast<unsigned>(rng() % 1000);
    p.difficulty = static_cast<unsigned>(rng() % 65);
    const std::size_t len = 1 + rng() % 64;
    for (std::size_t k = 0; k < len; ++k) p.nonce.push_back(static_cast<char>('0' + rng() % 10));
    const std::string wire = format_puzzle(p);
    CHECK(parse_puzzle(wire).same_challenge(p));
    CHECK(format_puzzle(parse_puzzle(wire)) == wire);
    Receipt r{p, std::to_string(rng())};
    const auto back = parse_receipt(format_receipt(r));
    CHECK(back.puzzle.same_challenge(p));
    CHECK(back.solution == r.solution);
  }
}

TEST_CASE("leading zero bit count") {
  const unsigned char a[] = {0x00, 0x00, 0x80};
  const unsigned char b[] = {0x00, 0x01};
  const unsigned char c[] = {0x7f};
  const unsigned char z[] = {0x00, 0x00};
  CHECK(leading_zero_bits(a) == 16);
  CHECK(leading_zero_bits(b) == 15);
  CHECK(leading_zero_bits(c) == 1);
  CHECK(leading_zero_bits(z) == 16);
}

TEST_CASE("receipt digest matches one-shot EVP digests") {
  std::mt19937_64 rng(11);
  for (unsigned alg : {0u, 1u, 2u}) {
    for (int i = 0; i < 200; ++i) {
      auto p = puzzle(alg, static_cast<unsigned>(rng() % 30), std::to_string(rng()));
      const std::uint64_t counter = rng() % 100000000;
      const std::string text = format_puzzle(p) + ":" + std::to_string(counter);
      const auto expect = evp_digest(alg, text);
      CHECK(receipt_digest(p, std::to_string(counter)) == expect);
      CHECK(PrefixHasher(p).zero_bits(counter) == leading_zero_bits(expect));
    }
  }
  CHECK_THROWS_AS(receipt_digest(puzzle(3, 0, "1"), "0"), std::invalid_argument);
}

TEST_CASE("verify_hash fixtures") {
  // SHA-256("0:8:777:1675") = 00fb5b15...: exactly eight leading zero bits.
  CHECK(verify_hash(puzzle(0, 8, "777"), "1675"));
  CHECK_FALSE(verify_hash(puzzle(0, 9, "777"), "1675"));
  CHECK(verify_hash(puzzle(0, 0, "1"), "0"));
  CHECK(verify_hash(puzzle(0, 0, "5"), "123"));
  CHECK_FALSE(verify_hash(puzzle(9, 0, "1"), "0"));
}

TEST_CASE("golden first solutions") {
  // Independent scalar scan (tests/oracle/pow_oracle.py).
  CHECK(solve(puzzle(0, 16, "12345"), 0, 1 << 20)->receipt.solution == "15956");
  CHECK(solve(puzzle(1, 16, "12345"), 0, 1 << 20)->receipt.solution == "1564");
  CHECK(solve(puzzle(2, 16, "12345"), 0, 1 << 20)->receipt.solution == "68574");
  CHECK(solve(puzzle(0, 8, "12345"), 0, 1 << 20)->receipt.solution == "939");
  CHECK(solve(puzzle(0, 12, "892734982734987"), 0, 1 << 20)->receipt.solution == "7814");
  auto s = solve(puzzle(0, 16, "12345"), 0, 1 << 20);
  CHECK(s->attempts == 15957);
}

TEST_CASE("solution plus one fails the check") {
  auto s = solve(puzzle(0, 8, "777"), 0, 1 << 20);
  REQUIRE(s);
  CHECK(s->receipt.solution == "794");
  CHECK_FALSE(verify_hash(s->receipt.puzzle, "795"));
}

TEST_CASE("solve edge cases") {
  auto s = solve(puzzle(0, 0, "42"), 17, 1);
  REQUIRE(s);
  CHECK(s->receipt.solution == "17");
  CHECK(s->attempts == 1);
  CHECK_FALSE(solve(puzzle(0, 16, "12345"), 0, 15956));
  CHECK(solve(puzzle(0, 16, "12345"), 0, 15957));
  CHECK_FALSE(solve(puzzle(0, 0, "1"), 0, 0));
  // Start after the first solution finds a later one.
  auto later = solve(puzzle(0, 8, "12345"), 940, 1 << 20);
  REQUIRE(later);
  CHECK(std::stoull(later->receipt.solution) > 939);
  CHECK(verify_hash(later->receipt.puzzle, later->receipt.solution));
}

TEST_CASE("parallel solver returns the serial answer") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 60; ++i) {
    auto p = puzzle(static_cast<unsigned>(i % 3), static_cast<unsigned>(rng() % 14), std::to_string(rng()));
    const std::uint64_t start = rng() % 1000;
    auto serial = solve(p, start, 1 << 22);
    for (int threads : {0, 1, 3}) {
      auto par = solve_parallel(p, start, 1 << 22, threads);
      REQUIRE(serial);
      REQUIRE(par);
      CHECK(par->receipt.solution == serial->receipt.solution);
      CHECK(par->attempts == serial->attempts);
    }
  }
  CHECK_FALSE(solve_parallel(puzzle(0, 16, "12345"), 0, 15956, 4));
  CHECK(solve_parallel(puzzle(0, 16, "12345"), 0, 15957, 4)->receipt.solution == "15956");
}

TEST_CASE("expected solve cost grows with difficulty") {
  std::mt19937_64 rng(5);
  auto mean_attempts = [&](unsigned d) {
    double total = 0;
    for (int i = 0; i < 200; ++i) total += static_cast<double>(solve(puzzle(0, d, std::to_string(rng())), 0, ~0ull)->attempts);
    return total / 200;
  };
  const double m6 = mean_attempts(6), m8 = mean_attempts(8), m10 = mean_attempts(10);
  CHECK(m8 > m6);
  CHECK(m10 > m8);
  CHECK(m8 > 128);
  CHECK(m8 < 512);
}

TEST_CASE("difficulty_for follows the rounding rule") {
  CHECK(difficulty_for(3600, 1 << 20) == 32);
  CHECK(difficulty_for(1, 1) == 0);
  CHECK(difficulty_for(0.5, 1) == 0);
  CHECK(difficulty_for(1, 1 << 10) == 10);
  CHECK(difficulty_for(1, 1448) == 10);  // log2(1448) = 10.4998
  CHECK(difficulty_for(1, 1449) == 11);  // log2(1449) = 10.5008
  CHECK(difficulty_for(1e30, 1e30) == 64);
  CHECK_THROWS_AS(difficulty_for(1, 0), std::invalid_argument);
  CHECK_THROWS_AS(difficulty_for(1, -5), std::invalid_argument);
}

TEST_CASE("calibrate rejects short benchmarks") {
  CHECK_THROWS_AS(calibrate(std::chrono::seconds(1), std::chrono::milliseconds(50)), std::invalid_argument);
  auto c = calibrate(std::chrono::seconds(1), std::chrono::milliseconds(100));
  CHECK(c.hashes_per_second > 0);
  CHECK(c.difficulty == difficulty_for(1, c.hashes_per_second));
}

TEST_CASE("calibrated difficulty costs about the target (wall-clock)") {
  const auto c = calibrate(std::chrono::seconds(1), std::chrono::milliseconds(500));
  std::mt19937_64 rng(1);
  std::vector<double> seconds;
  for (int i = 0; i < 9; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    auto s = solve(puzzle(0, c.difficulty, std::to_string(rng())), 0, ~0ull);
    REQUIRE(s);
    seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(seconds.begin(), seconds.end());
  MESSAGE("difficulty " << c.difficulty << ", median " << seconds[4] << " s");
  CHECK(seconds[4] >= 0.25);
  CHECK(seconds[4] <= 4.0);
}
