#pragma once

#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "oemstream/time.hpp"

namespace oem {

enum class EventType {
    arrival,          // clip handed to the descriptor queue
    completion,       // clip description finished (successfully or not)
    skipped,          // clip dropped by the catch-up policy (counts as completed)
    answer,           // query answered
    violation,        // budget violation
    queue_saturated,  // ingest blocked on a full clip queue
};

const char* to_string(EventType t);
EventType event_type_from_string(const std::string& s);

struct Event {
    EventType type = EventType::arrival;
    Micros stream_time{0};
    std::optional<std::size_t> clip;
    std::optional<std::string> query_id;
    nlohmann::json detail = nlohmann::json::object();
};

nlohmann::json event_to_json(const Event& e);
Event event_from_json(const nlohmann::json& j);

/// Append-only, multi-producer event log.
class EventLog {
public:
    void append(Event e);
    std::vector<Event> events() const;
    std::size_t size() const;

    // Events sorted by canonical_less. Independent of thread timing.
    std::vector<Event> canonical() const;

    void persist(const std::filesystem::path& path) const;

private:
    mutable std::mutex mu_;
    std::vector<Event> events_;
};

// Order among events of one clip at one instant (arrival first).
int tie_rank(EventType t);

// Stream time, then clip index (clip-less events last), then tie_rank, then
// query id. At one instant this puts the completion of clip k before the
// arrival of clip k+1 while never placing a completion before its own arrival.
bool canonical_less(const Event& a, const Event& b);

std::vector<Event> load_events(const std::filesystem::path& path);

}  // namespace oem
