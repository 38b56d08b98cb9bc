#pragma once

#include <string>

#include <json.hpp>

#include "oemstream/backend.hpp"

namespace oem {

/// Client for chat-completions servers with SSE token streaming.
///
/// Each clip is one streaming request whose content is the descriptor prompt
/// followed by the clip's frames as JPEG data URLs, downscaled to
/// profile.resolution. A batch is dispatched as concurrent requests and timed
/// from the first dispatch to the last completion. Transport errors are
/// retried once; timeouts are not.
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(std::string id = "http");

    std::string id() const override { return id_; }

    std::vector<DescribeResult> describe(const BackendProfile& profile, std::span<const Clip> clips,
                                         std::string_view prompt, const RequestContext& ctx = {}) override;

    AnswerResult answer_stream(const BackendProfile& profile, std::string_view prompt, std::size_t max_new_tokens,
                               const RequestContext& ctx = {}) override;

    CapabilityReport probe(const BackendProfile& profile) override;

private:
    std::string id_;
};

// Request bodies, exposed for tests.
nlohmann::json make_describe_request(const BackendProfile& profile, const Clip& clip, std::string_view prompt);
nlohmann::json make_answer_request(const BackendProfile& profile, std::string_view prompt,
                                   std::size_t max_new_tokens);

// Content of one streamed chat-completions chunk ("" when it carries none).
std::string delta_content(const nlohmann::json& chunk);

// Loads (or synthesizes, for "synthetic:" references) a frame, resizes it to
// `size` and returns a JPEG data URL.
std::string encode_frame_data_url(const std::string& payload_ref, const Resolution& size);

std::string base64_encode(std::string_view bytes);

// Largest value among metric lines whose name contains `needle`.
std::optional<double> scrape_metric(std::string_view prometheus_text, std::string_view needle);

}  // namespace oem
