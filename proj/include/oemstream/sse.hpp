#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace oem {

struct SseEvent {
    std::string event;  // empty means the default "message" type
    std::string data;
    std::optional<std::string> id;
};

/// Incremental server-sent-events decoder. Feed arbitrary chunks; complete
/// events are delivered to the callback as soon as their blank line arrives.
class SseParser {
public:
    // Return false from the callback to stop parsing.
    using Handler = std::function<bool(const SseEvent&)>;

    explicit SseParser(Handler handler) : handler_(std::move(handler)) {}

    // Returns false once the handler asked to stop.
    bool feed(std::string_view chunk);

    const std::optional<std::string>& last_event_id() const noexcept { return last_id_; }

private:
    bool process_line(std::string_view line);

    Handler handler_;
    std::string buffer_;
    SseEvent pending_;
    bool has_data_ = false;
    bool stopped_ = false;
    std::optional<std::string> last_id_;
};

// Serializes one event in wire format, terminated by a blank line.
std::string format_sse(const SseEvent& event);

}  // namespace oem
