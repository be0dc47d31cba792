#include "spamfriction/clock.hpp"

#include <thread>

namespace spamfriction {

TimePoint SystemClock::now() const {
  return std::chrono::time_point_cast<Duration>(std::chrono::system_clock::now());
}

void SystemClock::sleep_until(TimePoint t) { std::this_thread::sleep_until(t); }

TimePoint VirtualClock::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

void VirtualClock::sleep_until(TimePoint t) {
  std::lock_guard lock(mu_);
  if (t > now_) now_ = t;
}

void VirtualClock::advance(Duration d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

}  // namespace spamfriction
