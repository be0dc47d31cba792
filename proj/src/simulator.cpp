#include "spamfriction/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace spamfriction::sim {

namespace {

constexpr double kBudgetEpsilon = 1e-9;
// Machines per parallel batch; bounds the scratch vector for huge cohorts.
constexpr std::uint64_t kBatch = 1u << 20;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double resist_probability(const SimConfig& c, Intent intent) {
  return intent == Intent::Ham ? c.false_positive_rate : 1.0 - c.false_negative_rate;
}

MachineDay one_machine(const SimConfig& c, std::size_t cohort_index, std::uint64_t machine, unsigned day) {
  const Cohort& cohort = c.cohorts[cohort_index];
  std::mt19937_64 rng(machine_seed(c.seed, cohort_index, machine, day));
  double speed = c.speed_min;
  if (c.speed_max > c.speed_min) speed = std::uniform_real_distribution<double>(c.speed_min, c.speed_max)(rng);
  return simulate_machine_day(resist_probability(c, cohort.intent), c.burden_seconds / speed,
                              cohort.attempts_per_day.value_or(kUnboundedAttempts), rng);
}

void accumulate(CohortReport& r, const MachineDay& m) {
  r.attempted += m.attempted;
  r.resisted += m.resisted;
  r.delivered += m.delivered;
  r.refused += m.refused;
  r.work_seconds += m.work_seconds;
  r.max_machine_work_seconds = std::max(r.max_machine_work_seconds, m.work_seconds);
  ++r.machine_days;
}

void summarize(SimReport& report) {
  double ham_work = 0, spam_work = 0;
  std::uint64_t ham_delivered = 0, spam_delivered = 0;
  for (const auto& c : report.cohorts) {
    if (c.intent == Intent::Ham) {
      ham_work += c.work_seconds;
      ham_delivered += c.delivered;
    } else {
      spam_work += c.work_seconds;
      spam_delivered += c.delivered;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  report.ham_avg_cost = ham_delivered ? ham_work / static_cast<double>(ham_delivered) : nan;
  report.spam_avg_cost = spam_delivered ? spam_work / static_cast<double>(spam_delivered) : nan;
  if (report.ham_avg_cost == 0.0)
    report.advantage_ratio = std::numeric_limits<double>::infinity();
  else
    report.advantage_ratio = report.spam_avg_cost / report.ham_avg_cost;
  report.spam_per_day = static_cast<double>(spam_delivered) / report.horizon_days;
}

SimReport empty_report(const SimConfig& c) {
  SimReport report;
  report.label = c.label;
  report.false_positive_rate = c.false_positive_rate;
  report.false_negative_rate = c.false_negative_rate;
  report.burden_seconds = c.burden_seconds;
  report.horizon_days = c.horizon_days;
  report.scale_factor = c.scale_factor;
  for (const auto& cohort : c.cohorts) {
    CohortReport r;
    r.name = cohort.name;
    r.intent = cohort.intent;
    r.population = cohort.population;
    report.cohorts.push_back(r);
  }
  return report;
}

void check_rate(double v, const char* name) {
  if (!(v >= 0.0 && v < 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0, 1)");
}

}  // namespace

const char* to_string(Intent intent) { return intent == Intent::Ham ? "ham" : "spam"; }

Intent parse_intent(std::string_view text) {
  if (text == "ham") return Intent::Ham;
  if (text == "spam") return Intent::Spam;
  throw std::invalid_argument("intent must be 'ham' or 'spam', got '" + std::string(text) + "'");
}

void SimConfig::validate() const {
  if (cohorts.empty()) throw std::invalid_argument("at least one cohort is required");
  for (const auto& c : cohorts) {
    if (c.name.empty()) throw std::invalid_argument("cohort name must not be empty");
    if (c.population == 0) throw std::invalid_argument("cohort '" + c.name + "' has zero population");
    if (c.attempts_per_day && *c.attempts_per_day > kUnboundedAttempts)
      throw std::invalid_argument("cohort '" + c.name + "' attempts_per_day exceeds 1e9");
  }
  check_rate(false_positive_rate, "false_positive_rate");
  check_rate(false_negative_rate, "false_negative_rate");
  if (!(burden_seconds > 0.0) || !std::isfinite(burden_seconds))
    throw std::invalid_argument("burden_seconds must be positive");
  if (!(speed_min > 0.0) || !(speed_max >= speed_min) || !std::isfinite(speed_max))
    throw std::invalid_argument("speed range must satisfy 0 < min <= max");
  if (horizon_days == 0) throw std::invalid_argument("horizon_days must be at least 1");
  if (!(scale_factor > 0.0)) throw std::invalid_argument("scale_factor must be positive");
}

MachineDay simulate_machine_day(double p, double cost, std::uint64_t limit, std::mt19937_64& rng) {
  MachineDay m;
  double budget = kSecondsPerDay;
  std::uint64_t left = limit;
  std::geometric_distribution<std::uint64_t> gap(p > 0.0 && p < 1.0 ? p : 0.5);
  while (left > 0) {
    std::uint64_t free = left;
    if (p >= 1.0)
      free = 0;
    else if (p > 0.0)
      free = std::min(gap(rng), left);
    m.attempted += free;
    m.delivered += free;
    left -= free;
    if (left == 0) break;

    ++m.attempted;
    ++m.resisted;
    --left;
    if (cost > budget + kBudgetEpsilon) {
      ++m.refused;
      break;
    }
    budget -= cost;
    m.work_seconds += cost;
    ++m.delivered;
    if (budget <= kBudgetEpsilon) break;
  }
  return m;
}

std::uint64_t machine_seed(std::uint64_t seed, std::size_t cohort, std::uint64_t machine, unsigned day) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ cohort);
  h = splitmix64(h ^ machine);
  return splitmix64(h ^ day);
}

double CohortReport::avg_cost_seconds() const {
  return delivered ? work_seconds / static_cast<double>(delivered) : std::numeric_limits<double>::quiet_NaN();
}

double CohortReport::delivered_per_machine_day() const {
  return machine_days ? static_cast<double>(delivered) / static_cast<double>(machine_days) : 0.0;
}

const CohortReport* SimReport::find(std::string_view name) const {
  for (const auto& c : cohorts)
    if (c.name == name) return &c;
  return nullptr;
}

SimReport run_serial(const SimConfig& config) {
  config.validate();
  SimReport report = empty_report(config);
  for (std::size_t ci = 0; ci < config.cohorts.size(); ++ci) {
    for (unsigned day = 0; day < config.horizon_days; ++day) {
      for (std::uint64_t m = 0; m < config.cohorts[ci].population; ++m)
        accumulate(report.cohorts[ci], one_machine(config, ci, m, day));
    }
  }
  summarize(report);
  return report;
}

SimReport run(const SimConfig& config) {
  config.validate();
  SimReport report = empty_report(config);
  std::vector<MachineDay> scratch;
  for (std::size_t ci = 0; ci < config.cohorts.size(); ++ci) {
    const std::uint64_t population = config.cohorts[ci].population;
    for (unsigned day = 0; day < config.horizon_days; ++day) {
      for (std::uint64_t first = 0; first < population; first += kBatch) {
        const auto n = static_cast<std::int64_t>(std::min(kBatch, population - first));
        scratch.assign(static_cast<std::size_t>(n), MachineDay{});
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i)
          scratch[static_cast<std::size_t>(i)] = one_machine(config, ci, first + static_cast<std::uint64_t>(i), day);
        // Fixed-order reduction keeps the sums identical to run_serial().
        for (const auto& m : scratch) accumulate(report.cohorts[ci], m);
      }
    }
  }
  summarize(report);
  return report;
}

std::vector<SimConfig> SweepGrid::expand() const {
  std::vector<double> accs = accuracies;
  std::vector<double> burns = burdens;
  const bool base_rates = accs.empty();
  if (base_rates) accs.push_back(std::numeric_limits<double>::quiet_NaN());
  if (burns.empty()) burns.push_back(base.burden_seconds);
  std::vector<SimConfig> out;
  for (double a : accs) {
    for (double b : burns) {
      SimConfig c = base;
      if (!base_rates) {
        if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("accuracy must be in (0, 1]");
        c.false_positive_rate = c.false_negative_rate = 1.0 - a;
      }
      c.burden_seconds = b;
      char label[96];
      std::snprintf(label, sizeof label, "%s%sfp=%g fn=%g burden=%g", base.label.c_str(), base.label.empty() ? "" : ":",
                    c.false_positive_rate, c.false_negative_rate, b);
      c.label = label;
      out.push_back(std::move(c));
    }
  }
  if (out.empty()) throw std::invalid_argument("parameter grid is empty");
  return out;
}

std::vector<SweepRow> sweep(const SweepGrid& grid) {
  if (grid.base.cohorts.empty()) throw std::invalid_argument("parameter grid has no cohorts");
  std::vector<SweepRow> rows;
  for (const auto& c : grid.expand()) {
    SweepRow row;
    row.accuracy = 1.0 - c.false_positive_rate;
    row.report = run(c);
    row.analytic = policy::expected_costs(c.false_positive_rate, c.false_negative_rate, c.burden_seconds);
    rows.push_back(std::move(row));
  }
  return rows;
}

SimConfig preset(std::string_view name) {
  SimConfig c;
  // 100,000 legitimate machines against 10,000 bots, each bot standing in for
  // 1,000 real ones. Both send as fast as the burden allows.
  c.cohorts = {Cohort{"ham", 100'000, Intent::Ham, std::nullopt}, Cohort{"spam", 10'000, Intent::Spam, std::nullopt}};
  c.burden_seconds = 3600.0;
  c.horizon_days = 1;
  c.seed = 1;
  c.scale_factor = 1000.0;
  c.label = std::string(name);
  if (name == "paper-999") {
    c.false_positive_rate = c.false_negative_rate = 0.001;
  } else if (name == "paper-20") {
    c.false_positive_rate = c.false_negative_rate = 0.05;
  } else {
    throw std::invalid_argument("unknown preset '" + std::string(name) + "'");
  }
  return c;
}

std::vector<std::string> preset_names() { return {"paper-999", "paper-20"}; }

void print_table(std::ostream& out, const std::vector<SimReport>& reports) {
  char buf[256];
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%s  fp=%g fn=%g burden=%gs days=%u\n", r.label.c_str(), r.false_positive_rate,
                  r.false_negative_rate, r.burden_seconds, r.horizon_days);
    out << buf;
    std::snprintf(buf, sizeof buf, "  %-10s %-5s %10s %14s %12s %14s %16s %14s\n", "cohort", "kind", "machines",
                  "attempted", "resisted", "delivered", "work_seconds", "avg_cost_s");
    out << buf;
    for (const auto& c : r.cohorts) {
      std::snprintf(buf, sizeof buf, "  %-10s %-5s %10llu %14llu %12llu %14llu %16.1f %14.4f\n", c.name.c_str(),
                    to_string(c.intent), static_cast<unsigned long long>(c.population),
                    static_cast<unsigned long long>(c.attempted), static_cast<unsigned long long>(c.resisted),
                    static_cast<unsigned long long>(c.delivered), c.work_seconds, c.avg_cost_seconds());
      out << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "  ham avg cost %.4f s  spam avg cost %.4f s  ratio %.2f\n"
                  "  spam/day %.0f (x%g = %.4g)\n\n",
                  r.ham_avg_cost, r.spam_avg_cost, r.advantage_ratio, r.spam_per_day, r.scale_factor,
                  r.scaled_spam_per_day());
    out << buf;
  }
}

void write_csv(std::ostream& out, const std::vector<SimReport>& reports) {
  out << kCsvHeader << '\n';
  char buf[512];
  for (const auto& r : reports) {
    for (const auto& c : r.cohorts) {
      std::snprintf(buf, sizeof buf,
                    "%s,%.17g,%.17g,%.17g,%s,%s,%llu,%llu,%llu,%llu,%llu,%llu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                    "%.17g,%.17g,%.17g\n",
                    r.label.c_str(), r.false_positive_rate, r.false_negative_rate, r.burden_seconds, c.name.c_str(),
                    to_string(c.intent), static_cast<unsigned long long>(c.population),
                    static_cast<unsigned long long>(c.machine_days), static_cast<unsigned long long>(c.attempted),
                    static_cast<unsigned long long>(c.resisted), static_cast<unsigned long long>(c.delivered),
                    static_cast<unsigned long long>(c.refused), c.work_seconds, c.avg_cost_seconds(),
                    c.delivered_per_machine_day(), r.ham_avg_cost, r.spam_avg_cost, r.advantage_ratio,
                    r.spam_per_day, r.scale_factor, r.scaled_spam_per_day());
      out << buf;
    }
  }
}

}  // namespace spamfriction::sim
