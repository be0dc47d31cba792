#pragma once

#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>

#include "spamfriction/clock.hpp"

namespace spamfriction::policy {

struct SinBinConfig {
  unsigned max_refusals = 3;              // K
  Duration window = std::chrono::hours(1);  // W
  Duration block = std::chrono::hours(4);   // T

  void validate() const;
};

// Per-host refusal tracking. A host that declines the delivery burden K times
// within W is blocked for T. All operations are atomic per call.
class SinBin {
 public:
  explicit SinBin(SinBinConfig config = {});

  // Returns the block expiry if this refusal put the host in the sin bin.
  std::optional<TimePoint> record_refusal(const std::string& host, TimePoint now);
  void record_success(const std::string& host);

  std::optional<TimePoint> blocked_until(const std::string& host, TimePoint now) const;
  std::size_t refusals_in_window(const std::string& host, TimePoint now) const;

  const SinBinConfig& config() const { return config_; }

 private:
  struct HostState {
    std::deque<TimePoint> refusals;
    std::optional<TimePoint> blocked_until;
  };

  void prune(HostState& state, TimePoint now) const;
  void forget_idle(TimePoint now);

  SinBinConfig config_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, HostState> hosts_;
  std::size_t ops_since_sweep_ = 0;
};

}  // namespace spamfriction::policy
