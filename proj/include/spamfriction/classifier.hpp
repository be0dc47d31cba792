#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace spamfriction::classifier {

// Probability-like spamminess in [0, 1]; NaN and out-of-range values are
// rejected at construction.
class SpamScore {
 public:
  SpamScore() = default;
  explicit SpamScore(double value);
  double value() const { return value_; }
  auto operator<=>(const SpamScore&) const = default;

 private:
  double value_ = 0.0;
};

enum class ScorerMode { Builtin, External };

inline constexpr std::size_t kDefaultMaxBody = 52428800;  // 50 MiB

struct ScorerConfig {
  ScorerMode mode = ScorerMode::Builtin;
  std::map<std::string, double> weights;  // builtin; keys are case-folded tokens
  double bias = 0.0;                      // builtin logit offset
  std::string endpoint = "127.0.0.1:7070";
  std::chrono::milliseconds timeout{5000};
  double fallback_score = 0.0;
  std::size_t max_body_bytes = kDefaultMaxBody;

  // Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

// A small hand-tuned token table used when no weights are configured.
std::map<std::string, double> default_weights();

struct ScoreResult {
  SpamScore score;
  bool degraded = false;  // scorer failed; score is the configured fallback
};

// Lower-cased runs of alphanumeric bytes; everything else separates tokens.
std::vector<std::string> tokenize(std::string_view body);

double logistic(double x);

// logistic(bias + sum of token weights). Unknown tokens weigh 0.
SpamScore builtin_score(std::string_view body, const std::map<std::string, double>& weights, double bias = 0.0);

// Sends "SCORE <n>\n<body>" and expects one line holding a decimal in [0,1].
// Any failure (connect, timeout, malformed or out-of-range reply) returns the
// fallback with degraded set.
ScoreResult external_score(std::string_view body, std::string_view endpoint, std::chrono::milliseconds timeout,
                           double fallback);

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual ScoreResult score(std::string_view body) = 0;
};

// Dispatches on ScorerConfig::mode and counts degraded results.
class ConfiguredScorer final : public Scorer {
 public:
  explicit ConfiguredScorer(ScorerConfig config);

  // Throws std::length_error for bodies above max_body_bytes.
  ScoreResult score(std::string_view body) override;
  std::uint64_t degraded_count() const { return degraded_.load(); }
  const ScorerConfig& config() const { return config_; }

 private:
  ScorerConfig config_;
  std::atomic<std::uint64_t> degraded_{0};
};

// Always returns the same score. Used to pin the decision path in tests.
class FixedScorer final : public Scorer {
 public:
  explicit FixedScorer(double value) : score_(value) {}
  ScoreResult score(std::string_view) override { return {score_, false}; }

 private:
  SpamScore score_;
};

}  // namespace spamfriction::classifier
