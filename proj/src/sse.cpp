#include "oemstream/sse.hpp"

namespace oem {

bool SseParser::feed(std::string_view chunk) {
    if (stopped_) return false;
    buffer_.append(chunk);
    std::size_t start = 0;
    while (true) {
        const std::size_t nl = buffer_.find('\n', start);
        if (nl == std::string::npos) break;
        std::string_view line(buffer_.data() + start, nl - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        start = nl + 1;
        if (!process_line(line)) {
            stopped_ = true;
            buffer_.clear();
            return false;
        }
    }
    buffer_.erase(0, start);
    return true;
}

bool SseParser::process_line(std::string_view line) {
    if (line.empty()) {
        if (!has_data_) {
            pending_ = {};
            return true;
        }
        if (pending_.id) last_id_ = pending_.id;
        SseEvent ev = std::move(pending_);
        pending_ = {};
        has_data_ = false;
        return handler_(ev);
    }
    if (line.front() == ':') return true;  // comment / keep-alive

    std::string_view field = line;
    std::string_view value;
    if (const auto colon = line.find(':'); colon != std::string_view::npos) {
        field = line.substr(0, colon);
        value = line.substr(colon + 1);
        if (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    }
    if (field == "data") {
        if (has_data_) pending_.data.push_back('\n');
        pending_.data.append(value);
        has_data_ = true;
    } else if (field == "event") {
        pending_.event = std::string(value);
    } else if (field == "id") {
        pending_.id = std::string(value);
    }
    return true;
}

std::string format_sse(const SseEvent& event) {
    std::string out;
    if (event.id) out += "id: " + *event.id + "\n";
    if (!event.event.empty()) out += "event: " + event.event + "\n";
    std::size_t start = 0;
    while (true) {
        const std::size_t nl = event.data.find('\n', start);
        out += "data: ";
        out.append(event.data, start, nl == std::string::npos ? std::string::npos : nl - start);
        out += '\n';
        if (nl == std::string::npos) break;
        start = nl + 1;
    }
    out += '\n';
    return out;
}

}  // namespace oem
