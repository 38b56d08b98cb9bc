#include "oemstream/event_log.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "oemstream/error.hpp"

namespace oem {

const char* to_string(EventType t) {
    switch (t) {
        case EventType::arrival: return "arrival";
        case EventType::completion: return "completion";
        case EventType::skipped: return "skipped";
        case EventType::answer: return "answer";
        case EventType::violation: return "violation";
        case EventType::queue_saturated: return "queue_saturated";
    }
    return "unknown";
}

EventType event_type_from_string(const std::string& s) {
    for (EventType t : {EventType::arrival, EventType::completion, EventType::skipped, EventType::answer,
                        EventType::violation, EventType::queue_saturated})
        if (s == to_string(t)) return t;
    throw InputError("unknown event type '" + s + "'");
}

int tie_rank(EventType t) {
    switch (t) {
        case EventType::arrival: return 0;
        case EventType::completion:
        case EventType::skipped: return 1;
        case EventType::violation: return 2;
        case EventType::queue_saturated: return 3;
        case EventType::answer: return 4;
    }
    return 5;
}

bool canonical_less(const Event& a, const Event& b) {
    if (a.stream_time != b.stream_time) return a.stream_time < b.stream_time;
    const auto ca = a.clip.value_or(std::numeric_limits<std::size_t>::max());
    const auto cb = b.clip.value_or(std::numeric_limits<std::size_t>::max());
    if (ca != cb) return ca < cb;
    if (tie_rank(a.type) != tie_rank(b.type)) return tie_rank(a.type) < tie_rank(b.type);
    return a.query_id < b.query_id;
}

nlohmann::json event_to_json(const Event& e) {
    nlohmann::json j{{"type", to_string(e.type)}, {"t_us", e.stream_time.count()}};
    if (e.clip) j["clip"] = *e.clip;
    if (e.query_id) j["query_id"] = *e.query_id;
    if (!e.detail.empty()) j["detail"] = e.detail;
    return j;
}

Event event_from_json(const nlohmann::json& j) {
    Event e;
    e.type = event_type_from_string(j.at("type").get<std::string>());
    e.stream_time = Micros(j.at("t_us").get<std::int64_t>());
    if (j.contains("clip")) e.clip = j.at("clip").get<std::size_t>();
    if (j.contains("query_id")) e.query_id = j.at("query_id").get<std::string>();
    if (j.contains("detail")) e.detail = j.at("detail");
    return e;
}

void EventLog::append(Event e) {
    std::lock_guard lock(mu_);
    events_.push_back(std::move(e));
}

std::vector<Event> EventLog::events() const {
    std::lock_guard lock(mu_);
    return events_;
}

std::size_t EventLog::size() const {
    std::lock_guard lock(mu_);
    return events_.size();
}

std::vector<Event> EventLog::canonical() const {
    auto out = events();
    std::stable_sort(out.begin(), out.end(), canonical_less);
    return out;
}

void EventLog::persist(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write event log " + path.string());
    for (const Event& e : canonical()) out << event_to_json(e).dump() << '\n';
}

std::vector<Event> load_events(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(0, "cannot open event log " + path.string());
    std::vector<Event> events;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            events.push_back(event_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& e) {
            throw LoadError(n, e.what());
        }
    }
    return events;
}

}  // namespace oem
