#pragma once

#include <chrono>
#include <cstdint>
#include <optional>

#include "spamfriction/pow.hpp"

namespace spamfriction::pow {

struct Solution {
  Receipt receipt;
  std::uint64_t attempts = 0;  // counters examined, including the winner
};

// Sequential counter scan from start_counter; the reference implementation.
// Returns the first counter c >= start_counter that satisfies the puzzle, or
// nullopt once attempt_cap counters have failed.
std::optional<Solution> solve(const Puzzle& puzzle, std::uint64_t start_counter, std::uint64_t attempt_cap);

// OpenMP block scan. Each block of counters is split across threads and the
// lowest satisfying counter in the first successful block wins, so the result
// is identical to solve(). threads == 0 uses the OpenMP default.
std::optional<Solution> solve_parallel(const Puzzle& puzzle, std::uint64_t start_counter, std::uint64_t attempt_cap,
                                       int threads = 0);

// Hashes per second measured by scanning for `duration` of wall time.
double measure_hash_rate(std::chrono::duration<double> duration, unsigned algorithm = 0, bool parallel = false);

// round(log2(target_seconds * rate)) clamped to [0, 64]. Throws
// std::invalid_argument when the rate is not positive.
unsigned difficulty_for(double target_seconds, double hashes_per_second);

struct Calibration {
  unsigned difficulty = 0;
  double hashes_per_second = 0.0;
};

// Throws std::invalid_argument if bench_duration < 0.1 s and
// std::runtime_error if no rate could be measured.
Calibration calibrate(std::chrono::duration<double> target, std::chrono::duration<double> bench_duration,
                      unsigned algorithm = 0);

}  // namespace spamfriction::pow
