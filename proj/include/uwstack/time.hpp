#pragma once

#include <chrono>
#include <cstdint>

namespace uwstack {

using Clock = std::chrono::steady_clock;
using TimePoint = Clock::time_point;
using Duration = Clock::duration;
using Millis = std::chrono::milliseconds;
using Micros = std::chrono::microseconds;

inline TimePoint now() { return Clock::now(); }

// Milliseconds since an arbitrary fixed origin (monotonic).
inline double to_ms(Duration d) {
  return std::chrono::duration<double, std::milli>(d).count();
}

inline double to_s(Duration d) {
  return std::chrono::duration<double>(d).count();
}

inline Duration from_s(double s) {
  return std::chrono::duration_cast<Duration>(std::chrono::duration<double>(s));
}

// Epoch milliseconds, for log records only.
inline std::int64_t epoch_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace uwstack
