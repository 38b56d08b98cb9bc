#include "oemstream/backlog.hpp"

#include <algorithm>

namespace oem {

std::vector<BacklogSample> backlog_trace(std::span<const Event> events) {
    std::vector<const Event*> relevant;
    for (const Event& e : events)
        if (e.type == EventType::arrival || e.type == EventType::completion || e.type == EventType::skipped)
            relevant.push_back(&e);
    std::stable_sort(relevant.begin(), relevant.end(),
                     [](const Event* a, const Event* b) { return canonical_less(*a, *b); });

    std::vector<BacklogSample> trace;
    trace.reserve(relevant.size());
    std::size_t depth = 0;
    for (const Event* e : relevant) {
        if (e->type == EventType::arrival)
            ++depth;
        else if (depth > 0)
            --depth;
        trace.push_back({e->stream_time, depth});
    }
    return trace;
}

std::size_t max_depth(std::span<const BacklogSample> trace) {
    std::size_t m = 0;
    for (const auto& s : trace) m = std::max(m, s.depth);
    return m;
}

}  // namespace oem
