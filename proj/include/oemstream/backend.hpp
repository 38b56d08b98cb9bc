#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "oemstream/ingest.hpp"
#include "oemstream/options.hpp"

namespace oem {

struct Resolution {
    int height = 0;
    int width = 0;

    long area() const noexcept { return static_cast<long>(height) * width; }
    bool operator==(const Resolution&) const = default;
};

std::string to_string(const Resolution& r);      // "768x1024"
Resolution parse_resolution(std::string_view s);  // accepts "768x1024" and "768×1024"

struct BackendProfile {
    std::string endpoint;  // base URL, e.g. http://127.0.0.1:8000
    std::string chat_path = "/v1/chat/completions";
    std::string models_path = "/v1/models";
    std::string metrics_path;  // optional Prometheus-style metrics page
    std::string model_name;
    double fps = 2.0;
    Resolution resolution{768, 1024};
    std::size_t batch_size = 1;
    std::string quantization_label = "full";
    double request_timeout = 60.0;  // seconds
    std::optional<std::size_t> context_limit_tokens;
    std::size_t max_description_tokens = 512;

    void validate() const;
};

void to_json(nlohmann::json& j, const BackendProfile& p);
void from_json(const nlohmann::json& j, BackendProfile& p);

struct GenerationStats {
    double wall_time = 0.0;  // request dispatch to completion, seconds
    double ttft = 0.0;       // request dispatch to first streamed token, seconds
    std::size_t output_tokens = 0;
    double tokens_per_second = 0.0;
    std::optional<std::uint64_t> peak_memory_bytes;
    std::size_t batch_share = 1;  // clips that shared the request

    // Time attributed to one clip of the request.
    double per_clip_time() const { return wall_time / static_cast<double>(batch_share); }
};

enum class FailureKind { timeout, transport, server, ttft_timeout, partial_answer, injected };

const char* to_string(FailureKind kind);

struct Failure {
    FailureKind kind = FailureKind::transport;
    std::string message;
    int attempts = 1;

    std::string describe() const;
};

struct DescribeResult {
    std::string text;
    std::size_t tokens = 0;  // tokens of this description
    GenerationStats stats;   // request-level timing shared by the batch
    std::optional<Failure> failure;
};

struct AnswerResult {
    std::string first_token;
    double first_token_time = 0.0;
    std::string final_text;
    GenerationStats stats;
    std::optional<Failure> failure;
};

enum class Capability { yes, no, unknown };

const char* to_string(Capability c);

struct CapabilityReport {
    std::string backend_id;
    std::string model;
    Capability streaming = Capability::unknown;
    Capability image_input = Capability::unknown;
    std::optional<std::size_t> context_limit;
};

// Optional structured view of a QA request. Wire backends ignore it; the
// mock uses it to apply its answer policy without re-parsing the prompt.
struct QaHint {
    std::string_view memory_text;
    std::string_view question;
    std::span<const Candidate> candidates;
};

struct RequestContext {
    // Stable identity of the request (clip index, query ordinal). Backends with
    // randomized behavior derive their draws from it, not from call order.
    std::optional<std::uint64_t> key;
    std::uint64_t repeat = 0;
    std::optional<QaHint> qa;
};

/// Uniform contract for description and answer generation.
///
/// Implementations must be callable from the descriptor and QA workers at the
/// same time. Per-request failures are returned as values.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string id() const = 0;

    // One result per clip, in input order. Precondition: 1 <= clips.size() <= batch_size.
    virtual std::vector<DescribeResult> describe(const BackendProfile& profile, std::span<const Clip> clips,
                                                 std::string_view prompt, const RequestContext& ctx = {}) = 0;

    virtual AnswerResult answer_stream(const BackendProfile& profile, std::string_view prompt,
                                       std::size_t max_new_tokens, const RequestContext& ctx = {}) = 0;

    // Throws ConnectivityError when the endpoint cannot be reached.
    virtual CapabilityReport probe(const BackendProfile& profile) = 0;
};

// Shared precondition checks for implementations.
void check_describe_request(const BackendProfile& profile, std::span<const Clip> clips, std::string_view prompt);
void check_answer_request(std::string_view prompt, std::size_t max_new_tokens);

// Rough prompt size used for context-limit checks: one token per 4 bytes.
std::size_t estimate_tokens(std::string_view text);
std::size_t estimate_tokens(std::size_t bytes);

}  // namespace oem
