#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace oem {

// Stream time is kept in integer microseconds so that event ordering and
// budget comparisons are exact.
using Micros = std::chrono::microseconds;

inline Micros from_seconds(double seconds) {
    return Micros(static_cast<std::int64_t>(std::llround(seconds * 1e6)));
}

inline double to_seconds(Micros t) {
    return static_cast<double>(t.count()) / 1e6;
}

}  // namespace oem
