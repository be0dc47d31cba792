#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "spamfriction/policy.hpp"

namespace spamfriction::sim {

// Virtual-time model of sender populations paying a per-message burden.
// Time is an accounting quantity here; nothing is actually solved.

inline constexpr double kSecondsPerDay = 86400.0;
// Attempt ceiling that stands in for "unbounded" so a perfect classifier
// (resist probability 0) still terminates.
inline constexpr std::uint64_t kUnboundedAttempts = 1'000'000'000;

enum class Intent { Ham, Spam };

const char* to_string(Intent intent);
Intent parse_intent(std::string_view text);

struct Cohort {
  std::string name;
  std::uint64_t population = 1;
  Intent intent = Intent::Ham;
  std::optional<std::uint64_t> attempts_per_day;  // nullopt: unbounded
};

struct SimConfig {
  std::vector<Cohort> cohorts;
  double false_positive_rate = 0.001;
  double false_negative_rate = 0.001;
  double burden_seconds = 3600.0;
  // Machine speed multipliers are drawn uniformly from [min, max].
  double speed_min = 1.0;
  double speed_max = 1.0;
  unsigned horizon_days = 1;
  std::uint64_t seed = 1;
  // Real-world machines represented by one simulated machine; reported only.
  double scale_factor = 1.0;
  std::string label;

  void validate() const;
};

struct MachineDay {
  std::uint64_t attempted = 0;
  std::uint64_t resisted = 0;
  std::uint64_t delivered = 0;
  std::uint64_t refused = 0;  // resisted messages the machine had no time left for
  double work_seconds = 0.0;
  bool operator==(const MachineDay&) const = default;
};

// One machine's day: free messages in runs drawn from the geometric
// distribution, each run ended by a resisted message costing burden/speed.
// The machine stops when its attempts run out, its time budget is used up,
// or a resisted message no longer fits in the remaining time.
MachineDay simulate_machine_day(double resist_probability, double cost_seconds, std::uint64_t attempt_limit,
                                std::mt19937_64& rng);

// Per-machine-day RNG seed; independent of thread scheduling.
std::uint64_t machine_seed(std::uint64_t seed, std::size_t cohort, std::uint64_t machine, unsigned day);

struct CohortReport {
  std::string name;
  Intent intent = Intent::Ham;
  std::uint64_t population = 0;
  std::uint64_t machine_days = 0;
  std::uint64_t attempted = 0;
  std::uint64_t resisted = 0;
  std::uint64_t delivered = 0;
  std::uint64_t refused = 0;
  double work_seconds = 0.0;
  double max_machine_work_seconds = 0.0;

  double avg_cost_seconds() const;
  double delivered_per_machine_day() const;
  bool operator==(const CohortReport&) const = default;
};

struct SimReport {
  std::string label;
  double false_positive_rate = 0.0;
  double false_negative_rate = 0.0;
  double burden_seconds = 0.0;
  unsigned horizon_days = 1;
  double scale_factor = 1.0;
  std::vector<CohortReport> cohorts;
  double ham_avg_cost = 0.0;     // seconds of work per delivered ham message
  double spam_avg_cost = 0.0;    // seconds of work per delivered spam message
  double advantage_ratio = 0.0;  // spam_avg_cost / ham_avg_cost
  double spam_per_day = 0.0;     // simulated population
  double scaled_spam_per_day() const { return spam_per_day * scale_factor; }

  const CohortReport* find(std::string_view name) const;
  bool operator==(const SimReport&) const = default;
};

// OpenMP across machines. Produces the same report as run_serial().
SimReport run(const SimConfig& config);
// Single-threaded reference.
SimReport run_serial(const SimConfig& config);

struct SweepGrid {
  SimConfig base;
  std::vector<double> accuracies;  // fp = fn = 1 - accuracy; empty: base rates
  std::vector<double> burdens;     // empty: base burden

  std::vector<SimConfig> expand() const;  // throws std::invalid_argument if empty
};

struct SweepRow {
  double accuracy = 0.0;
  SimReport report;
  policy::CostEstimate analytic;
};

std::vector<SweepRow> sweep(const SweepGrid& grid);

SimConfig preset(std::string_view name);  // "paper-999" or "paper-20"
std::vector<std::string> preset_names();

void print_table(std::ostream& out, const std::vector<SimReport>& reports);
// Header: label,fp,fn,burden_seconds,cohort,intent,population,machine_days,
// attempted,resisted,delivered,refused,work_seconds,avg_cost_seconds,
// delivered_per_machine_day,ham_avg_cost,spam_avg_cost,advantage_ratio,
// spam_per_day,scale_factor,scaled_spam_per_day
void write_csv(std::ostream& out, const std::vector<SimReport>& reports);
inline constexpr std::string_view kCsvHeader =
    "label,fp,fn,burden_seconds,cohort,intent,population,machine_days,attempted,resisted,delivered,refused,"
    "work_seconds,avg_cost_seconds,delivered_per_machine_day,ham_avg_cost,spam_avg_cost,advantage_ratio,"
    "spam_per_day,scale_factor,scaled_spam_per_day";

}  // namespace spamfriction::sim
