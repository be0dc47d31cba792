#pragma once

#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spamfriction/classifier.hpp"
#include "spamfriction/sinbin.hpp"

namespace spamfriction::policy {

enum class ResistanceMode { SingleLevel, Graduated };

struct Bucket {
  double upper_bound = 1.0;  // inclusive score bound
  unsigned difficulty = 0;
  bool operator==(const Bucket&) const = default;
};

struct PolicyConfig {
  double resist_threshold = 0.05;
  ResistanceMode mode = ResistanceMode::SingleLevel;
  // Unset means "calibrate to the burden on the receiving host at startup".
  std::optional<unsigned> base_difficulty;
  std::vector<Bucket> graduated_buckets;
  unsigned jitter_bits = 0;
  // fnmatch(3) patterns, matched case-insensitively against the envelope
  // sender and the peer host.
  std::vector<std::string> whitelist;
  SinBinConfig sinbin;

  // Throws std::invalid_argument. Bucket bounds must ascend and difficulties
  // must not descend.
  void validate() const;
};

class ResistanceDecision {
 public:
  enum class Kind { Accept, Resist, Blocked };

  static ResistanceDecision accept() { return ResistanceDecision(Kind::Accept, 0, {}); }
  static ResistanceDecision resist(unsigned difficulty);
  static ResistanceDecision blocked(TimePoint until) { return ResistanceDecision(Kind::Blocked, 0, until); }

  Kind kind() const { return kind_; }
  unsigned difficulty() const { return difficulty_; }
  TimePoint until() const { return until_; }
  bool operator==(const ResistanceDecision&) const = default;

 private:
  ResistanceDecision(Kind kind, unsigned difficulty, TimePoint until)
      : kind_(kind), difficulty_(difficulty), until_(until) {}

  Kind kind_;
  unsigned difficulty_;
  TimePoint until_;
};

const char* to_string(ResistanceDecision::Kind kind);

bool is_whitelisted(const PolicyConfig& config, std::string_view sender_host, std::string_view sender_addr);

// Difficulty before jitter for a score at or above the threshold.
unsigned base_difficulty_for(const classifier::SpamScore& score, const PolicyConfig& config);

// Whitelist first, then the sin bin, then the threshold, then the resistance
// level with symmetric whole-bit jitter clamped to [0, 64].
ResistanceDecision decide(const classifier::SpamScore& score, std::string_view sender_host,
                          std::string_view sender_addr, const PolicyConfig& config, const SinBin& sinbin,
                          std::mt19937_64& rng, TimePoint now);

// Thread-safe bundle of config, sin bin and jitter RNG for a running server.
class PolicyEngine {
 public:
  PolicyEngine(PolicyConfig config, std::uint64_t seed);

  ResistanceDecision decide(const classifier::SpamScore& score, std::string_view sender_host,
                            std::string_view sender_addr, TimePoint now);
  SinBin& sinbin() { return sinbin_; }
  const PolicyConfig& config() const { return config_; }

 private:
  PolicyConfig config_;
  SinBin sinbin_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
};

struct CostEstimate {
  double ham_avg_seconds = 0.0;
  double spam_avg_seconds = 0.0;
  double advantage_ratio = 0.0;  // +inf when the false-positive rate is 0
};

// ham = fp * burden, spam = (1 - fn) * burden, ratio = spam / ham.
CostEstimate expected_costs(double false_positive_rate, double false_negative_rate, double burden_seconds);

}  // namespace spamfriction::policy
