#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "oemstream/event_log.hpp"

namespace oem {

struct BacklogSample {
    Micros time{0};
    std::size_t depth = 0;  // clips arrived minus clips completed, after this event

    bool operator==(const BacklogSample&) const = default;
};

/// Replays arrival / completion / skip events in canonical order (see
/// canonical_less: at one instant, clip k completes before clip k+1
/// arrives) and reports the backlog depth after each one.
std::vector<BacklogSample> backlog_trace(std::span<const Event> events);

std::size_t max_depth(std::span<const BacklogSample> trace);

}  // namespace oem
