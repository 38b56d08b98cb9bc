#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "oemstream/backend.hpp"

namespace oem {

// A scalar drawn per request: fixed, gaussian (clamped at zero), or read from
// a scripted sequence indexed by the request key.
struct Distribution {
    enum class Kind { constant, gaussian, sequence };

    Kind kind = Kind::constant;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> values;

    static Distribution constant(double v) { return {Kind::constant, v, 0.0, {}}; }
    static Distribution gaussian(double mean, double stddev) { return {Kind::gaussian, mean, stddev, {}}; }
    static Distribution sequence(std::vector<double> v) { return {Kind::sequence, 0.0, 0.0, std::move(v)}; }

    double sample(std::mt19937_64& rng, std::uint64_t index) const;
};

void from_json(const nlohmann::json& j, Distribution& d);
void to_json(nlohmann::json& j, const Distribution& d);

struct AnswerPolicy {
    enum class Kind {
        contains,        // first candidate (A..D) whose text occurs verbatim in the memory text
        answer_key,      // looks the question up in `key`
        fixed,           // always `fixed`
        uniform_random,  // uniform letter per request
        raw,             // emits `raw_token` verbatim (for unparseable-answer tests)
    };

    Kind kind = Kind::contains;
    Option fixed = Option::A;
    std::map<std::string, Option> key;
    std::string raw_token;
};

void from_json(const nlohmann::json& j, AnswerPolicy& p);

struct MockScript {
    std::uint64_t seed = 0;
    Distribution describe_latency = Distribution::constant(1.0);  // seconds per clip
    Distribution tokens_per_second = Distribution::constant(30.0);
    std::optional<Distribution> peak_memory_gb;
    Distribution ttft = Distribution::constant(0.2);
    double inter_token_time = 0.02;
    std::vector<std::string> phrases;               // canned description vocabulary
    std::map<std::size_t, std::string> clip_texts;  // exact text for selected clips
    AnswerPolicy answer_policy;
    std::optional<std::size_t> context_limit;

    // Failure injection.
    std::optional<std::string> fail_all;         // every request fails with this message
    std::set<std::size_t> timeout_clips;         // describe times out (observed = request_timeout)
    std::set<std::size_t> broken_clips;          // transport error on both attempts
    std::optional<FailureKind> answer_failure;   // ttft_timeout or partial_answer on every answer

    // Wall seconds slept per simulated second (0 = return immediately).
    double sleep_scale = 0.0;
};

void from_json(const nlohmann::json& j, MockScript& s);

/// Deterministic scripted backend. Every draw is derived from
/// (seed, request kind, request key, repeat), never from call order, so
/// concurrent workers and batching do not change outcomes.
class MockBackend final : public Backend {
public:
    explicit MockBackend(MockScript script, std::string id = "mock");

    std::string id() const override { return id_; }

    std::vector<DescribeResult> describe(const BackendProfile& profile, std::span<const Clip> clips,
                                         std::string_view prompt, const RequestContext& ctx = {}) override;

    AnswerResult answer_stream(const BackendProfile& profile, std::string_view prompt, std::size_t max_new_tokens,
                               const RequestContext& ctx = {}) override;

    CapabilityReport probe(const BackendProfile& profile) override;

    const MockScript& script() const noexcept { return script_; }

    // Canned description for clip k (what describe returns absent failures).
    std::string canned_text(const Clip& clip, std::uint64_t repeat) const;

private:
    Option choose(const QaHint* hint, std::mt19937_64& rng) const;

    MockScript script_;
    std::string id_;
    std::atomic<std::uint64_t> unkeyed_{0};
};

// Seeds a generator from a request identity.
std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t key, std::uint64_t repeat);

}  // namespace oem
