#pragma once

#include <cstdint>

namespace cacs {

// Virtual time. All simulation timestamps and durations are integer
// microseconds so that event arithmetic is exact and platform independent.
using VTime = std::int64_t;
using VDur = std::int64_t;

constexpr VDur kMicrosPerSecond = 1'000'000;

constexpr VDur vseconds(double s) {
  return static_cast<VDur>(s * static_cast<double>(kMicrosPerSecond) + (s >= 0 ? 0.5 : -0.5));
}

constexpr double to_seconds(VTime t) {
  return static_cast<double>(t) / static_cast<double>(kMicrosPerSecond);
}

}  // namespace cacs
