#include "spamfriction/sinbin.hpp"

#include <stdexcept>

namespace spamfriction::policy {

void SinBinConfig::validate() const {
  if (max_refusals < 1) throw std::invalid_argument("sinbin max_refusals must be at least 1");
  if (window <= Duration::zero()) throw std::invalid_argument("sinbin window must be positive");
  if (block < Duration::zero()) throw std::invalid_argument("sinbin block duration must not be negative");
}

SinBin::SinBin(SinBinConfig config) : config_(config) { config_.validate(); }

void SinBin::prune(HostState& state, TimePoint now) const {
  while (!state.refusals.empty() && now - state.refusals.front() > config_.window) state.refusals.pop_front();
  if (state.blocked_until && now >= *state.blocked_until) state.blocked_until.reset();
}

void SinBin::forget_idle(TimePoint now) {
  if (++ops_since_sweep_ < 1024) return;
  ops_since_sweep_ = 0;
  for (auto it = hosts_.begin(); it != hosts_.end();) {
    prune(it->second, now);
    if (it->second.refusals.empty() && !it->second.blocked_until) {
      it = hosts_.erase(it);
    } else {
      ++it;
    }
  }
}

std::optional<TimePoint> SinBin::record_refusal(const std::string& host, TimePoint now) {
  std::lock_guard lock(mu_);
  forget_idle(now);
  HostState& state = hosts_[host];
  prune(state, now);
  state.refusals.push_back(now);
  if (state.refusals.size() >= config_.max_refusals) {
    state.blocked_until = now + config_.block;
    state.refusals.clear();
    return state.blocked_until;
  }
  return std::nullopt;
}

void SinBin::record_success(const std::string& host) {
  std::lock_guard lock(mu_);
  if (auto it = hosts_.find(host); it != hosts_.end()) it->second.refusals.clear();
}

std::optional<TimePoint> SinBin::blocked_until(const std::string& host, TimePoint now) const {
  std::lock_guard lock(mu_);
  auto it = hosts_.find(host);
  if (it == hosts_.end() || !it->second.blocked_until || now >= *it->second.blocked_until) return std::nullopt;
  return it->second.blocked_until;
}

std::size_t SinBin::refusals_in_window(const std::string& host, TimePoint now) const {
  std::lock_guard lock(mu_);
  auto it = hosts_.find(host);
  if (it == hosts_.end()) return 0;
  std::size_t n = 0;
  for (auto t : it->second.refusals) {
    if (now - t <= config_.window) ++n;
  }
  return n;
}

}  // namespace spamfriction::policy
