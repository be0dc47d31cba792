#pragma once

#include <chrono>
#include <mutex>

namespace spamfriction {

using Duration = std::chrono::milliseconds;
using TimePoint = std::chrono::time_point<std::chrono::system_clock, Duration>;

inline Duration from_seconds(double seconds) {
  return std::chrono::round<Duration>(std::chrono::duration<double>(seconds));
}

inline double to_seconds(Duration d) {
  return std::chrono::duration<double>(d).count();
}

inline TimePoint at_seconds(double seconds) { return TimePoint{from_seconds(seconds)}; }

// Time source consulted by every timer in the server and client (puzzle TTL,
// legacy delay, sin-bin windows) so tests can run in virtual time.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimePoint now() const = 0;
  virtual void sleep_until(TimePoint t) = 0;
  void sleep_for(Duration d) { sleep_until(now() + d); }
};

class SystemClock final : public Clock {
 public:
  TimePoint now() const override;
  void sleep_until(TimePoint t) override;
};

// Manually driven clock. sleep_until() jumps forward instead of blocking.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(TimePoint start = TimePoint{}) : now_(start) {}

  TimePoint now() const override;
  void sleep_until(TimePoint t) override;
  void advance(Duration d);

 private:
  mutable std::mutex mu_;
  TimePoint now_;
};

}  // namespace spamfriction
