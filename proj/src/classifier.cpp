#include "spamfriction/classifier.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>

#include "spamfriction/net.hpp"

namespace spamfriction::classifier {

SpamScore::SpamScore(double value) : value_(value) {
  if (std::isnan(value) || value < 0.0 || value > 1.0)
    throw std::invalid_argument("spam score must lie in [0, 1]");
}

void ScorerConfig::validate() const {
  if (std::isnan(fallback_score) || fallback_score < 0.0 || fallback_score > 1.0)
    throw std::invalid_argument("fallback_score must lie in [0, 1]");
  if (timeout.count() <= 0) throw std::invalid_argument("timeout must be positive");
  if (max_body_bytes == 0) throw std::invalid_argument("max_body_bytes must be positive");
  for (const auto& [token, w] : weights) {
    if (!std::isfinite(w)) throw std::invalid_argument("weight for '" + token + "' is not finite");
  }
  if (!std::isfinite(bias)) throw std::invalid_argument("bias is not finite");
  if (mode == ScorerMode::External) net::parse_endpoint(endpoint);
}

std::map<std::string, double> default_weights() {
  return {
      {"spam", 2.0},     {"viagra", 3.0},   {"casino", 2.5},   {"lottery", 2.5}, {"winner", 1.5},
      {"free", 1.0},     {"offer", 1.0},    {"guaranteed", 1.5}, {"click", 1.0}, {"unsubscribe", 0.5},
      {"bitcoin", 1.5},  {"prize", 2.0},    {"urgent", 1.0},   {"meeting", -1.5}, {"agenda", -1.5},
      {"thanks", -1.0},  {"attached", -1.0}, {"review", -0.5}, {"lunch", -1.0},  {"regards", -1.0},
  };
}

std::vector<std::string> tokenize(std::string_view body) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : body) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

SpamScore builtin_score(std::string_view body, const std::map<std::string, double>& weights, double bias) {
  double logit = bias;
  for (const auto& token : tokenize(body)) {
    if (auto it = weights.find(token); it != weights.end()) logit += it->second;
  }
  return SpamScore(logistic(logit));
}

ScoreResult external_score(std::string_view body, std::string_view endpoint, std::chrono::milliseconds timeout,
                           double fallback) {
  const ScoreResult degraded{SpamScore(fallback), true};
  try {
    auto stream = net::TcpStream::connect(net::parse_endpoint(endpoint), timeout);
    std::string request = "SCORE " + std::to_string(body.size()) + "\n";
    request.append(body);
    stream.write_all(request);
    auto line = stream.read_line(timeout);
    if (!line || line->empty()) return degraded;
    double value = 0.0;
    const char* first = line->data();
    const char* last = first + line->size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || std::isnan(value) || value < 0.0 || value > 1.0) return degraded;
    return {SpamScore(value), false};
  } catch (const std::exception&) {
    return degraded;
  }
}

ConfiguredScorer::ConfiguredScorer(ScorerConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.mode == ScorerMode::Builtin && config_.weights.empty()) config_.weights = default_weights();
}

ScoreResult ConfiguredScorer::score(std::string_view body) {
  if (body.size() > config_.max_body_bytes) throw std::length_error("message body exceeds scorer limit");
  if (config_.mode == ScorerMode::Builtin) return {builtin_score(body, config_.weights, config_.bias), false};
  auto result = external_score(body, config_.endpoint, config_.timeout, config_.fallback_score);
  if (result.degraded) degraded_.fetch_add(1);
  return result;
}

}  // namespace spamfriction::classifier
