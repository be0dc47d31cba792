#include <benchmark/benchmark.h>

#include "spamfriction/simulator.hpp"
#include "spamfriction/solver.hpp"

namespace sf = spamfriction;

namespace {

sf::pow::Puzzle puzzle(unsigned d) { return {0, d, "892734982734987", {}, {}}; }

void BM_SolveSerial(benchmark::State& state) {
  const auto p = puzzle(static_cast<unsigned>(state.range(0)));
  std::uint64_t start = 0;
  for (auto _ : state) {
    auto s = sf::pow::solve(p, start, ~0ull);
    start = std::stoull(s->receipt.solution) + 1;
    benchmark::DoNotOptimize(s);
  }
}

void BM_SolveParallel(benchmark::State& state) {
  const auto p = puzzle(static_cast<unsigned>(state.range(0)));
  std::uint64_t start = 0;
  for (auto _ : state) {
    auto s = sf::pow::solve_parallel(p, start, ~0ull, 0);
    start = std::stoull(s->receipt.solution) + 1;
    benchmark::DoNotOptimize(s);
  }
}

sf::sim::SimConfig sim_config(std::int64_t machines) {
  auto c = sf::sim::preset("paper-999");
  c.cohorts[0].population = static_cast<std::uint64_t>(machines);
  c.cohorts[1].population = static_cast<std::uint64_t>(machines / 10);
  return c;
}

void BM_SimulateSerial(benchmark::State& state) {
  const auto c = sim_config(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sf::sim::run_serial(c));
}

void BM_SimulateParallel(benchmark::State& state) {
  const auto c = sim_config(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sf::sim::run(c));
}

}  // namespace

BENCHMARK(BM_SolveSerial)->Arg(16)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SolveParallel)->Arg(16)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateSerial)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateParallel)->Arg(10000)->Arg(100000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
