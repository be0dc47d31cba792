#include "spamfriction/policy.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "spamfriction/pow.hpp"

namespace spamfriction::policy {

namespace {

std::string lowered(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool unit_interval(double x) { return !std::isnan(x) && x >= 0.0 && x <= 1.0; }

}  // namespace

void PolicyConfig::validate() const {
  if (!unit_interval(resist_threshold)) throw std::invalid_argument("resist_threshold must lie in [0, 1]");
  if (base_difficulty && *base_difficulty > pow::kMaxDifficulty)
    throw std::invalid_argument("base_difficulty exceeds 64 bits");
  if (jitter_bits > 4) throw std::invalid_argument("jitter_bits must be at most 4");
  if (mode == ResistanceMode::Graduated && graduated_buckets.empty())
    throw std::invalid_argument("graduated mode needs at least one bucket");
  for (std::size_t i = 0; i < graduated_buckets.size(); ++i) {
    const Bucket& b = graduated_buckets[i];
    if (!unit_interval(b.upper_bound)) throw std::invalid_argument("bucket bound must lie in [0, 1]");
    if (b.difficulty > pow::kMaxDifficulty) throw std::invalid_argument("bucket difficulty exceeds 64 bits");
    if (i > 0) {
      const Bucket& prev = graduated_buckets[i - 1];
      if (b.upper_bound <= prev.upper_bound) throw std::invalid_argument("bucket bounds must ascend");
      if (b.difficulty < prev.difficulty) throw std::invalid_argument("bucket difficulties must not descend");
    }
  }
  sinbin.validate();
}

ResistanceDecision ResistanceDecision::resist(unsigned difficulty) {
  if (difficulty > pow::kMaxDifficulty) throw std::invalid_argument("difficulty exceeds 64 bits");
  return ResistanceDecision(Kind::Resist, difficulty, {});
}

const char* to_string(ResistanceDecision::Kind kind) {
  switch (kind) {
    case ResistanceDecision::Kind::Accept: return "accept";
    case ResistanceDecision::Kind::Resist: return "resist";
    case ResistanceDecision::Kind::Blocked: return "blocked";
  }
  return "?";
}

bool is_whitelisted(const PolicyConfig& config, std::string_view sender_host, std::string_view sender_addr) {
  const std::string host = lowered(sender_host);
  const std::string addr = lowered(sender_addr);
  for (const auto& entry : config.whitelist) {
    const std::string pattern = lowered(entry);
    if (!addr.empty() && ::fnmatch(pattern.c_str(), addr.c_str(), 0) == 0) return true;
    if (!host.empty() && ::fnmatch(pattern.c_str(), host.c_str(), 0) == 0) return true;
  }
  return false;
}

unsigned base_difficulty_for(const classifier::SpamScore& score, const PolicyConfig& config) {
  if (config.mode == ResistanceMode::SingleLevel) return config.base_difficulty.value_or(0);
  for (const Bucket& b : config.graduated_buckets) {
    if (score.value() <= b.upper_bound) return b.difficulty;
  }
  return config.graduated_buckets.back().difficulty;
}

ResistanceDecision decide(const classifier::SpamScore& score, std::string_view sender_host,
                          std::string_view sender_addr, const PolicyConfig& config, const SinBin& sinbin,
                          std::mt19937_64& rng, TimePoint now) {
  if (is_whitelisted(config, sender_host, sender_addr)) return ResistanceDecision::accept();
  if (auto until = sinbin.blocked_until(std::string(sender_host), now)) return ResistanceDecision::blocked(*until);
  if (score.value() < config.resist_threshold) return ResistanceDecision::accept();

  int difficulty = static_cast<int>(base_difficulty_for(score, config));
  if (config.jitter_bits > 0) {
    const int j = static_cast<int>(config.jitter_bits);
    difficulty += std::uniform_int_distribution<int>(-j, j)(rng);
  }
  difficulty = std::clamp(difficulty, 0, static_cast<int>(pow::kMaxDifficulty));
  return ResistanceDecision::resist(static_cast<unsigned>(difficulty));
}

PolicyEngine::PolicyEngine(PolicyConfig config, std::uint64_t seed)
    : config_(std::move(config)), sinbin_(config_.sinbin), rng_(seed) {
  config_.validate();
  if (config_.mode == ResistanceMode::SingleLevel && !config_.base_difficulty)
    throw std::invalid_argument("single-level mode needs a base difficulty; calibrate before starting");
}

ResistanceDecision PolicyEngine::decide(const classifier::SpamScore& score, std::string_view sender_host,
                                        std::string_view sender_addr, TimePoint now) {
  std::lock_guard lock(rng_mu_);
  return policy::decide(score, sender_host, sender_addr, config_, sinbin_, rng_, now);
}

CostEstimate expected_costs(double false_positive_rate, double false_negative_rate, double burden_seconds) {
  auto rate_ok = [](double r) { return !std::isnan(r) && r >= 0.0 && r < 1.0; };
  if (!rate_ok(false_positive_rate) || !rate_ok(false_negative_rate))
    throw std::invalid_argument("classifier error rates must lie in [0, 1)");
  if (!(burden_seconds > 0.0)) throw std::invalid_argument("burden must be positive");

  CostEstimate c;
  c.ham_avg_seconds = false_positive_rate * burden_seconds;
  c.spam_avg_seconds = (1.0 - false_negative_rate) * burden_seconds;
  c.advantage_ratio = false_positive_rate == 0.0 ? std::numeric_limits<double>::infinity()
                                                 : c.spam_avg_seconds / c.ham_avg_seconds;
  return c;
}

}  // namespace spamfriction::policy
