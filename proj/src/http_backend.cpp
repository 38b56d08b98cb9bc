#include "oemstream/http_backend.hpp"

#include <chrono>
#include <future>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>
#include <openssl/evp.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "oemstream/error.hpp"
#include "oemstream/sse.hpp"

namespace oem {

namespace {

using SteadyClock = std::chrono::steady_clock;

double seconds_since(SteadyClock::time_point t0) {
    return std::chrono::duration<double>(SteadyClock::now() - t0).count();
}

struct StreamOutcome {
    std::string text;
    std::string first_token;
    std::optional<double> first_token_time;
    double wall_time = 0.0;
    std::size_t content_events = 0;
    std::optional<std::size_t> usage_tokens;
    bool finished = false;  // saw [DONE] or a finish_reason
    std::optional<Failure> failure;
};

httplib::Client make_client(const BackendProfile& profile) {
    httplib::Client cli(profile.endpoint);
    const auto secs = static_cast<time_t>(profile.request_timeout);
    const auto usecs = static_cast<time_t>((profile.request_timeout - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    cli.set_keep_alive(false);
    return cli;
}

// One streaming POST. Timing starts immediately before the request is sent.
StreamOutcome stream_once(const BackendProfile& profile, const std::string& body, std::size_t stop_after_tokens) {
    StreamOutcome out;
    auto cli = make_client(profile);
    const auto deadline_s = profile.request_timeout;
    bool deadline_hit = false;
    bool parse_error = false;

    SseParser parser([&](const SseEvent& ev) {
        if (ev.data == "[DONE]") {
            out.finished = true;
            return false;
        }
        nlohmann::json chunk;
        try {
            chunk = nlohmann::json::parse(ev.data);
        } catch (const nlohmann::json::exception&) {
            parse_error = true;
            return false;
        }
        if (auto it = chunk.find("usage"); it != chunk.end() && it->is_object() && it->contains("completion_tokens"))
            out.usage_tokens = it->at("completion_tokens").get<std::size_t>();
        if (auto ch = chunk.find("choices"); ch != chunk.end() && ch->is_array() && !ch->empty()) {
            const auto& choice = ch->front();
            if (auto fr = choice.find("finish_reason"); fr != choice.end() && !fr->is_null()) out.finished = true;
        }
        const std::string piece = delta_content(chunk);
        if (!piece.empty()) {
            if (!out.first_token_time) {
                out.first_token_time = 0.0;  // filled in by caller-visible clock below
                out.first_token = piece;
            }
            out.text += piece;
            ++out.content_events;
        }
        return true;
    });

    httplib::Request req;
    req.method = "POST";
    req.path = profile.chat_path;
    req.body = body;
    req.set_header("Content-Type", "application/json");
    req.set_header("Accept", "text/event-stream");

    const auto t0 = SteadyClock::now();
    int status = 0;
    std::string error_body;
    req.response_handler = [&](const httplib::Response& res) {
        status = res.status;
        return true;
    };
    req.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
        if (status != 200) {
            error_body.append(data, len);
            return true;
        }
        const bool had_token = out.first_token_time.has_value();
        const bool keep_going = parser.feed(std::string_view(data, len));
        if (!had_token && out.first_token_time) out.first_token_time = seconds_since(t0);
        if (seconds_since(t0) > deadline_s) {
            deadline_hit = true;
            return false;
        }
        if (stop_after_tokens > 0 && out.content_events >= stop_after_tokens && out.finished) return false;
        return keep_going;
    };

    auto result = cli.send(req);
    out.wall_time = seconds_since(t0);

    if (status != 0 && status != 200) {
        out.failure = Failure{FailureKind::server, fmt::format("HTTP {}: {}", status, error_body.substr(0, 200)), 1};
        return out;
    }
    if (parse_error) {
        out.failure = Failure{FailureKind::server, "malformed stream chunk", 1};
        return out;
    }
    const bool cancelled_by_us = result.error() == httplib::Error::Canceled && !deadline_hit;
    if (!result && !cancelled_by_us) {
        const bool timed_out = deadline_hit || out.wall_time >= deadline_s * 0.99 ||
                               result.error() == httplib::Error::ConnectionTimeout;
        if (timed_out) {
            out.failure = Failure{FailureKind::timeout, fmt::format("no completion within {} s", deadline_s), 1};
        } else if (out.first_token_time) {
            out.failure = Failure{FailureKind::partial_answer, "stream closed mid-answer", 1};
        } else {
            out.failure = Failure{FailureKind::transport, httplib::to_string(result.error()), 1};
        }
    }
    return out;
}

StreamOutcome stream_with_retry(const BackendProfile& profile, const std::string& body, std::size_t stop_after) {
    StreamOutcome out = stream_once(profile, body, stop_after);
    if (out.failure && out.failure->kind == FailureKind::transport) {
        out = stream_once(profile, body, stop_after);
        if (out.failure) out.failure->attempts = 2;
    }
    return out;
}

std::optional<std::uint64_t> read_peak_memory(const BackendProfile& profile) {
    if (profile.metrics_path.empty()) return std::nullopt;
    auto cli = make_client(profile);
    auto res = cli.Get(profile.metrics_path);
    if (!res || res->status != 200) return std::nullopt;
    auto v = scrape_metric(res->body, "peak_memory_bytes");
    if (!v) return std::nullopt;
    return static_cast<std::uint64_t>(*v);
}

nlohmann::json text_part(std::string_view text) {
    return {{"type", "text"}, {"text", std::string(text)}};
}

}  // namespace

std::string base64_encode(std::string_view bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                  reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string encode_frame_data_url(const std::string& payload_ref, const Resolution& size) {
    cv::Mat image;
    if (payload_ref.starts_with("synthetic:")) {
        // Deterministic flat image; its shade is derived from the reference.
        const auto shade = static_cast<double>(std::hash<std::string>{}(payload_ref) % 200 + 28);
        image = cv::Mat(size.height, size.width, CV_8UC3, cv::Scalar(shade, shade, shade));
    } else {
        image = cv::imread(payload_ref, cv::IMREAD_COLOR);
        if (image.empty()) throw InputError("cannot read frame " + payload_ref);
        if (image.rows != size.height || image.cols != size.width) {
            cv::Mat resized;
            cv::resize(image, resized, cv::Size(size.width, size.height), 0, 0, cv::INTER_AREA);
            image = std::move(resized);
        }
    }
    std::vector<unsigned char> jpeg;
    if (!cv::imencode(".jpg", image, jpeg)) throw InputError("cannot encode frame " + payload_ref);
    return "data:image/jpeg;base64," +
           base64_encode(std::string_view(reinterpret_cast<const char*>(jpeg.data()), jpeg.size()));
}

nlohmann::json make_describe_request(const BackendProfile& profile, const Clip& clip, std::string_view prompt) {
    nlohmann::json content = nlohmann::json::array();
    content.push_back(text_part(prompt));
    for (const Frame& f : clip.frames)
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", encode_frame_data_url(f.payload_ref, profile.resolution)}}}});
    return {{"model", profile.model_name},
            {"stream", true},
            {"stream_options", {{"include_usage", true}}},
            {"max_tokens", profile.max_description_tokens},
            {"temperature", 0.0},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::move(content)}}})}};
}

nlohmann::json make_answer_request(const BackendProfile& profile, std::string_view prompt,
                                   std::size_t max_new_tokens) {
    return {{"model", profile.model_name},
            {"stream", true},
            {"stream_options", {{"include_usage", true}}},
            {"max_tokens", max_new_tokens},
            {"temperature", 0.0},
            {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::string(prompt)}}})}};
}

std::string delta_content(const nlohmann::json& chunk) {
    auto ch = chunk.find("choices");
    if (ch == chunk.end() || !ch->is_array() || ch->empty()) return {};
    const auto& choice = ch->front();
    if (auto d = choice.find("delta"); d != choice.end() && d->is_object()) {
        if (auto c = d->find("content"); c != d->end() && c->is_string()) return c->get<std::string>();
    }
    if (auto t = choice.find("text"); t != choice.end() && t->is_string()) return t->get<std::string>();
    return {};
}

std::optional<double> scrape_metric(std::string_view text, std::string_view needle) {
    std::optional<double> best;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        const auto space = line.rfind(' ');
        if (space == std::string::npos) continue;
        const std::string_view name(line.data(), line.find_first_of(" {"));
        if (name.find(needle) == std::string_view::npos) continue;
        try {
            const double v = std::stod(line.substr(space + 1));
            if (!best || v > *best) best = v;
        } catch (const std::exception&) {
        }
    }
    return best;
}

HttpBackend::HttpBackend(std::string id) : id_(std::move(id)) {}

std::vector<DescribeResult> HttpBackend::describe(const BackendProfile& profile, std::span<const Clip> clips,
                                                  std::string_view prompt, const RequestContext&) {
    check_describe_request(profile, clips, prompt);
    std::vector<std::string> bodies;
    bodies.reserve(clips.size());
    for (const Clip& c : clips) bodies.push_back(make_describe_request(profile, c, prompt).dump());

    const auto t0 = SteadyClock::now();
    std::vector<std::future<StreamOutcome>> inflight;
    inflight.reserve(clips.size());
    for (const auto& body : bodies)
        inflight.push_back(std::async(std::launch::async, [&profile, &body] {
            return stream_with_retry(profile, body, 0);
        }));
    std::vector<StreamOutcome> outcomes;
    for (auto& f : inflight) outcomes.push_back(f.get());
    const double request_time = seconds_since(t0);

    std::size_t total_tokens = 0;
    double first_token = request_time;
    for (const auto& o : outcomes) {
        if (o.failure) continue;
        total_tokens += o.usage_tokens.value_or(o.content_events);
        if (o.first_token_time) first_token = std::min(first_token, *o.first_token_time);
    }
    const auto peak = read_peak_memory(profile);

    std::vector<DescribeResult> results(clips.size());
    for (std::size_t i = 0; i < clips.size(); ++i) {
        DescribeResult& r = results[i];
        r.failure = outcomes[i].failure;
        if (!r.failure) {
            r.text = outcomes[i].text;
            r.tokens = outcomes[i].usage_tokens.value_or(outcomes[i].content_events);
        }
        if (!r.failure && r.text.empty()) r.failure = Failure{FailureKind::server, "empty description", 1};
        r.stats.wall_time = request_time;
        r.stats.ttft = std::min(first_token, request_time);
        r.stats.output_tokens = total_tokens;
        r.stats.tokens_per_second = request_time > 0.0 ? static_cast<double>(total_tokens) / request_time : 0.0;
        r.stats.peak_memory_bytes = peak;
        r.stats.batch_share = clips.size();
    }
    return results;
}

AnswerResult HttpBackend::answer_stream(const BackendProfile& profile, std::string_view prompt,
                                        std::size_t max_new_tokens, const RequestContext&) {
    check_answer_request(prompt, max_new_tokens);
    const std::string body = make_answer_request(profile, prompt, max_new_tokens).dump();
    StreamOutcome o = stream_with_retry(profile, body, max_new_tokens);

    AnswerResult out;
    out.first_token = o.first_token;
    out.final_text = o.text;
    out.stats.wall_time = o.wall_time;
    out.stats.output_tokens = o.usage_tokens.value_or(o.content_events);
    out.stats.tokens_per_second =
        o.wall_time > 0.0 ? static_cast<double>(out.stats.output_tokens) / o.wall_time : 0.0;
    out.failure = o.failure;
    if (o.first_token_time) {
        out.first_token_time = *o.first_token_time;
        out.stats.ttft = std::min(*o.first_token_time, o.wall_time);
    } else {
        out.first_token_time = o.wall_time;
        out.stats.ttft = o.wall_time;
        if (!out.failure || out.failure->kind == FailureKind::timeout)
            out.failure = Failure{FailureKind::ttft_timeout, "no token received", out.failure ? out.failure->attempts : 1};
    }
    if (!out.failure && !o.finished)
        out.failure = Failure{FailureKind::partial_answer, "stream ended without completion marker", 1};
    return out;
}

CapabilityReport HttpBackend::probe(const BackendProfile& profile) {
    auto cli = make_client(profile);
    auto res = cli.Get(profile.models_path);
    if (!res) throw ConnectivityError(profile.endpoint, httplib::to_string(res.error()));
    if (res->status != 200) throw ConnectivityError(profile.endpoint, fmt::format("HTTP {}", res->status));

    CapabilityReport report;
    report.backend_id = id_;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw ConnectivityError(profile.endpoint, std::string("malformed model listing: ") + e.what());
    }
    const nlohmann::json* model = nullptr;
    if (auto data = doc.find("data"); data != doc.end() && data->is_array()) {
        for (const auto& m : *data) {
            if (!model) model = &m;
            if (m.value("id", std::string{}) == profile.model_name) {
                model = &m;
                break;
            }
        }
    }
    if (!model) return report;

    report.model = model->value("id", std::string{});
    for (const char* key : {"max_model_len", "context_length", "context_window", "max_context_length"}) {
        if (auto it = model->find(key); it != model->end() && it->is_number_integer()) {
            report.context_limit = it->get<std::size_t>();
            break;
        }
    }
    if (auto caps = model->find("capabilities"); caps != model->end()) {
        const auto has = [&](std::string_view name) {
            if (caps->is_array())
                for (const auto& c : *caps)
                    if (c.is_string() && c.get<std::string>() == name) return true;
            if (caps->is_object())
                if (auto it = caps->find(std::string(name)); it != caps->end() && it->is_boolean()) return it->get<bool>();
            return false;
        };
        report.image_input = (has("vision") || has("multimodal") || has("image")) ? Capability::yes : Capability::no;
        if (caps->is_object() && caps->contains("streaming"))
            report.streaming = has("streaming") ? Capability::yes : Capability::no;
        else if (has("streaming"))
            report.streaming = Capability::yes;
    }
    return report;
}

}  // namespace oem
