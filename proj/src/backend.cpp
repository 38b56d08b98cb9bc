#include "oemstream/backend.hpp"

#include <cmath>

#include <fmt/format.h>

#include "oemstream/error.hpp"

namespace oem {

std::string to_string(const Resolution& r) { return fmt::format("{}x{}", r.height, r.width); }

Resolution parse_resolution(std::string_view s) {
    std::size_t sep = s.find('x');
    std::size_t sep_len = 1;
    if (sep == std::string_view::npos) {
        sep = s.find("\xC3\x97");  // U+00D7 multiplication sign
        sep_len = 2;
    }
    if (sep == std::string_view::npos) throw InputError("resolution must look like HxW: " + std::string(s));
    Resolution r;
    try {
        r.height = std::stoi(std::string(s.substr(0, sep)));
        r.width = std::stoi(std::string(s.substr(sep + sep_len)));
    } catch (const std::exception&) {
        throw InputError("resolution must look like HxW: " + std::string(s));
    }
    if (r.height <= 0 || r.width <= 0) throw InputError("resolution must be positive: " + std::string(s));
    return r;
}

void BackendProfile::validate() const {
    if (batch_size < 1) throw ConfigError("backend profile: batch_size must be >= 1");
    if (!(fps > 0.0)) throw ConfigError("backend profile: fps must be positive");
    if (!(request_timeout > 0.0)) throw ConfigError("backend profile: request_timeout must be positive");
    if (resolution.height <= 0 || resolution.width <= 0)
        throw ConfigError("backend profile: resolution must be positive");
}

void to_json(nlohmann::json& j, const BackendProfile& p) {
    j = nlohmann::json{{"endpoint", p.endpoint},
                       {"chat_path", p.chat_path},
                       {"models_path", p.models_path},
                       {"metrics_path", p.metrics_path},
                       {"model_name", p.model_name},
                       {"fps", p.fps},
                       {"resolution", to_string(p.resolution)},
                       {"batch_size", p.batch_size},
                       {"quantization_label", p.quantization_label},
                       {"request_timeout", p.request_timeout},
                       {"max_description_tokens", p.max_description_tokens}};
    if (p.context_limit_tokens) j["context_limit_tokens"] = *p.context_limit_tokens;
}

void from_json(const nlohmann::json& j, BackendProfile& p) {
    p.endpoint = j.value("endpoint", p.endpoint);
    p.chat_path = j.value("chat_path", p.chat_path);
    p.models_path = j.value("models_path", p.models_path);
    p.metrics_path = j.value("metrics_path", p.metrics_path);
    p.model_name = j.value("model_name", p.model_name);
    p.fps = j.value("fps", p.fps);
    if (auto it = j.find("resolution"); it != j.end()) {
        if (it->is_string())
            p.resolution = parse_resolution(it->get<std::string>());
        else
            p.resolution = Resolution{it->at(0).get<int>(), it->at(1).get<int>()};
    }
    p.batch_size = j.value("batch_size", p.batch_size);
    p.quantization_label = j.value("quantization_label", p.quantization_label);
    p.request_timeout = j.value("request_timeout", p.request_timeout);
    p.max_description_tokens = j.value("max_description_tokens", p.max_description_tokens);
    if (auto it = j.find("context_limit_tokens"); it != j.end() && !it->is_null())
        p.context_limit_tokens = it->get<std::size_t>();
}

const char* to_string(FailureKind kind) {
    switch (kind) {
        case FailureKind::timeout: return "timeout";
        case FailureKind::transport: return "transport";
        case FailureKind::server: return "server";
        case FailureKind::ttft_timeout: return "ttft-timeout";
        case FailureKind::partial_answer: return "partial-answer";
        case FailureKind::injected: return "injected";
    }
    return "unknown";
}

std::string Failure::describe() const {
    if (attempts > 1) return fmt::format("{}: {} (after {} attempts)", to_string(kind), message, attempts);
    return fmt::format("{}: {}", to_string(kind), message);
}

const char* to_string(Capability c) {
    switch (c) {
        case Capability::yes: return "yes";
        case Capability::no: return "no";
        case Capability::unknown: return "unknown";
    }
    return "unknown";
}

void check_describe_request(const BackendProfile& profile, std::span<const Clip> clips, std::string_view prompt) {
    if (clips.empty()) throw InputError("describe needs at least one clip");
    if (clips.size() > profile.batch_size)
        throw InputError(fmt::format("describe got {} clips for batch size {}", clips.size(), profile.batch_size));
    if (prompt.empty()) throw InputError("describe needs a non-empty prompt");
}

void check_answer_request(std::string_view prompt, std::size_t max_new_tokens) {
    if (prompt.empty()) throw InputError("answer needs a non-empty prompt");
    if (max_new_tokens < 1) throw InputError("max_new_tokens must be >= 1");
}

std::size_t estimate_tokens(std::string_view text) { return estimate_tokens(text.size()); }

std::size_t estimate_tokens(std::size_t bytes) { return (bytes + 3) / 4; }

}  // namespace oem
