#include "spamfriction/solver.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace spamfriction::pow {

namespace {

constexpr std::uint64_t kNotFound = std::numeric_limits<std::uint64_t>::max();

Solution make_solution(const Puzzle& puzzle, std::uint64_t start, std::uint64_t counter) {
  Solution s;
  s.receipt.puzzle = puzzle;
  s.receipt.solution = std::to_string(counter);
  s.attempts = counter - start + 1;
  return s;
}

// Counters left before either the cap or uint64 wraparound.
std::uint64_t scan_limit(std::uint64_t start, std::uint64_t cap) {
  return std::min(cap, std::numeric_limits<std::uint64_t>::max() - start);
}

}  // namespace

std::optional<Solution> solve(const Puzzle& puzzle, std::uint64_t start_counter, std::uint64_t attempt_cap) {
  const PrefixHasher hasher(puzzle);
  const std::uint64_t limit = scan_limit(start_counter, attempt_cap);
  for (std::uint64_t i = 0; i < limit; ++i) {
    if (hasher.satisfies(start_counter + i)) return make_solution(puzzle, start_counter, start_counter + i);
  }
  return std::nullopt;
}

std::optional<Solution> solve_parallel(const Puzzle& puzzle, std::uint64_t start_counter, std::uint64_t attempt_cap,
                                       int threads) {
  const PrefixHasher hasher(puzzle);
  const int nthreads = threads > 0 ? threads : omp_get_max_threads();
  // Small first block so easy puzzles do not pay for a full sweep.
  std::uint64_t block = 256;
  const std::uint64_t max_block = static_cast<std::uint64_t>(nthreads) * 8192;

  const std::uint64_t limit = scan_limit(start_counter, attempt_cap);
  std::uint64_t done = 0;
  while (done < limit) {
    const std::uint64_t n = std::min(block, limit - done);
    const std::uint64_t base = start_counter + done;
    std::uint64_t best = kNotFound;

#pragma omp parallel for num_threads(nthreads) schedule(static) reduction(min : best)
    for (std::uint64_t i = 0; i < n; ++i) {
      if (base + i < best && hasher.satisfies(base + i)) best = base + i;
    }

    if (best != kNotFound) return make_solution(puzzle, start_counter, best);
    done += n;
    block = std::min(block * 2, max_block);
  }
  return std::nullopt;
}

double measure_hash_rate(std::chrono::duration<double> duration, unsigned algorithm, bool parallel) {
  using clock = std::chrono::steady_clock;
  Puzzle probe{algorithm, kMaxDifficulty, "1", {}, {}};
  const PrefixHasher hasher(probe);
  const int nthreads = parallel ? omp_get_max_threads() : 1;

  std::uint64_t hashes = 0;
  volatile unsigned sink = 0;
  const auto begin = clock::now();
  auto elapsed = std::chrono::duration<double>::zero();
  std::uint64_t counter = 0;
  do {
    constexpr std::uint64_t kBatch = 4096;
    unsigned acc = 0;
#pragma omp parallel for num_threads(nthreads) reduction(+ : acc)
    for (std::uint64_t i = 0; i < kBatch; ++i) acc += hasher.zero_bits(counter + i);
    sink = sink + acc;
    counter += kBatch;
    hashes += kBatch;
    elapsed = clock::now() - begin;
  } while (elapsed < duration);

  return elapsed.count() > 0.0 ? static_cast<double>(hashes) / elapsed.count() : 0.0;
}

unsigned difficulty_for(double target_seconds, double hashes_per_second) {
  if (!(hashes_per_second > 0.0) || !std::isfinite(hashes_per_second))
    throw std::invalid_argument("hash rate must be positive");
  const double work = target_seconds * hashes_per_second;
  if (!(work > 1.0)) return 0;
  const double bits = std::round(std::log2(work));
  return static_cast<unsigned>(std::clamp(bits, 0.0, static_cast<double>(kMaxDifficulty)));
}

Calibration calibrate(std::chrono::duration<double> target, std::chrono::duration<double> bench_duration,
                      unsigned algorithm) {
  if (bench_duration.count() < 0.1) throw std::invalid_argument("benchmark duration must be at least 0.1 s");
  const double rate = measure_hash_rate(bench_duration, algorithm);
  if (!(rate > 0.0)) throw std::runtime_error("could not measure a hash rate");
  return {difficulty_for(target.count(), rate), rate};
}

}  // namespace spamfriction::pow
