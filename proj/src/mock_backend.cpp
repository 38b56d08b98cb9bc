#include "oemstream/mock_backend.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include <fmt/format.h>

#include "oemstream/error.hpp"

namespace oem {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t kDescribeStream = 0x64657363;  // "desc"
constexpr std::uint64_t kAnswerStream = 0x616e7377;    // "answ"

const std::vector<std::string>& default_phrases() {
    static const std::vector<std::string> phrases = {
        "pick up a blue cup from the kitchen counter",
        "put the keys on the table near the door",
        "open the fridge and take out a bottle of water",
        "walk into the living room and sit on the sofa",
        "wash a plate in the sink and leave it on the drying rack",
        "take a book from the shelf and place it on the desk",
        "plug my phone into the charger next to the bed",
        "cut a tomato on the wooden chopping board",
        "put a jacket on the chair in the hallway",
        "throw a paper bag into the recycling bin",
        "water the plant on the windowsill",
        "talk to a woman in a green sweater at the entrance",
    };
    return phrases;
}

void maybe_sleep(double simulated_seconds, double scale) {
    if (scale <= 0.0 || simulated_seconds <= 0.0) return;
    std::this_thread::sleep_for(std::chrono::duration<double>(simulated_seconds * scale));
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && text[i] == ' ') ++i;
        std::size_t j = i;
        while (j < text.size() && text[j] != ' ') ++j;
        if (j > i) words.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return words;
}

}  // namespace

std::mt19937_64 keyed_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t key, std::uint64_t repeat) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ stream);
    h = splitmix64(h ^ key);
    h = splitmix64(h ^ repeat);
    return std::mt19937_64(h);
}

double Distribution::sample(std::mt19937_64& rng, std::uint64_t index) const {
    switch (kind) {
        case Kind::constant: return mean;
        case Kind::gaussian: {
            if (stddev <= 0.0) return std::max(0.0, mean);
            std::normal_distribution<double> normal(mean, stddev);
            return std::max(0.0, normal(rng));
        }
        case Kind::sequence:
            if (values.empty()) throw ConfigError("scripted sequence is empty");
            return values[index % values.size()];
    }
    return mean;
}

void from_json(const nlohmann::json& j, Distribution& d) {
    if (j.is_number()) {
        d = Distribution::constant(j.get<double>());
    } else if (j.is_array()) {
        d = Distribution::sequence(j.get<std::vector<double>>());
    } else if (j.is_object()) {
        if (j.contains("sequence"))
            d = Distribution::sequence(j.at("sequence").get<std::vector<double>>());
        else if (j.contains("constant"))
            d = Distribution::constant(j.at("constant").get<double>());
        else
            d = Distribution::gaussian(j.at("mean").get<double>(), j.value("std", 0.0));
    } else {
        throw ConfigError("distribution must be a number, an array or an object");
    }
    for (double v : d.values)
        if (v < 0.0) throw ConfigError("scripted values must be non-negative");
    if (d.mean < 0.0 && d.kind == Distribution::Kind::constant) throw ConfigError("constant must be non-negative");
}

void to_json(nlohmann::json& j, const Distribution& d) {
    switch (d.kind) {
        case Distribution::Kind::constant: j = {{"constant", d.mean}}; break;
        case Distribution::Kind::gaussian: j = {{"mean", d.mean}, {"std", d.stddev}}; break;
        case Distribution::Kind::sequence: j = {{"sequence", d.values}}; break;
    }
}

void from_json(const nlohmann::json& j, AnswerPolicy& p) {
    if (j.is_string()) {
        p = AnswerPolicy{};
        p.kind = AnswerPolicy::Kind::contains;
        const auto name = j.get<std::string>();
        if (name == "contains") p.kind = AnswerPolicy::Kind::contains;
        else if (name == "uniform_random" || name == "random") p.kind = AnswerPolicy::Kind::uniform_random;
        else if (name == "answer_key") p.kind = AnswerPolicy::Kind::answer_key;
        else throw ConfigError("unknown answer policy '" + name + "'");
        return;
    }
    const auto name = j.at("kind").get<std::string>();
    if (name == "contains") {
        p.kind = AnswerPolicy::Kind::contains;
    } else if (name == "answer_key") {
        p.kind = AnswerPolicy::Kind::answer_key;
        for (const auto& [q, letter] : j.value("key", nlohmann::json::object()).items()) {
            const auto s = letter.get<std::string>();
            auto opt = s.size() == 1 ? option_from_char(s[0]) : std::nullopt;
            if (!opt) throw ConfigError("answer key letter must be A-D");
            p.key[q] = *opt;
        }
    } else if (name == "fixed") {
        p.kind = AnswerPolicy::Kind::fixed;
        const auto s = j.at("letter").get<std::string>();
        auto opt = s.size() == 1 ? option_from_char(s[0]) : std::nullopt;
        if (!opt) throw ConfigError("fixed answer letter must be A-D");
        p.fixed = *opt;
    } else if (name == "uniform_random" || name == "random") {
        p.kind = AnswerPolicy::Kind::uniform_random;
    } else if (name == "raw") {
        p.kind = AnswerPolicy::Kind::raw;
        p.raw_token = j.at("token").get<std::string>();
    } else {
        throw ConfigError("unknown answer policy '" + name + "'");
    }
}

void from_json(const nlohmann::json& j, MockScript& s) {
    s.seed = j.value("seed", s.seed);
    if (j.contains("describe_latency")) s.describe_latency = j.at("describe_latency").get<Distribution>();
    if (j.contains("tokens_per_second")) s.tokens_per_second = j.at("tokens_per_second").get<Distribution>();
    if (j.contains("peak_memory_gb") && !j.at("peak_memory_gb").is_null())
        s.peak_memory_gb = j.at("peak_memory_gb").get<Distribution>();
    if (j.contains("ttft")) s.ttft = j.at("ttft").get<Distribution>();
    s.inter_token_time = j.value("inter_token_time", s.inter_token_time);
    s.sleep_scale = j.value("sleep_scale", s.sleep_scale);
    if (s.sleep_scale < 0.0) throw ConfigError("sleep_scale must be non-negative");
    if (j.contains("phrases")) s.phrases = j.at("phrases").get<std::vector<std::string>>();
    if (j.contains("clip_texts"))
        for (const auto& [k, text] : j.at("clip_texts").items()) s.clip_texts[std::stoul(k)] = text.get<std::string>();
    if (j.contains("answer_policy")) s.answer_policy = j.at("answer_policy").get<AnswerPolicy>();
    if (j.contains("context_limit") && !j.at("context_limit").is_null())
        s.context_limit = j.at("context_limit").get<std::size_t>();
    if (j.contains("fail_all") && !j.at("fail_all").is_null()) s.fail_all = j.at("fail_all").get<std::string>();
    if (j.contains("timeout_clips")) s.timeout_clips = j.at("timeout_clips").get<std::set<std::size_t>>();
    if (j.contains("broken_clips")) s.broken_clips = j.at("broken_clips").get<std::set<std::size_t>>();
    if (j.contains("answer_failure") && !j.at("answer_failure").is_null()) {
        const auto f = j.at("answer_failure").get<std::string>();
        if (f == "ttft-timeout") s.answer_failure = FailureKind::ttft_timeout;
        else if (f == "partial-answer") s.answer_failure = FailureKind::partial_answer;
        else throw ConfigError("answer_failure must be ttft-timeout or partial-answer");
    }
}

MockBackend::MockBackend(MockScript script, std::string id) : script_(std::move(script)), id_(std::move(id)) {}

std::string MockBackend::canned_text(const Clip& clip, std::uint64_t repeat) const {
    if (auto it = script_.clip_texts.find(clip.index); it != script_.clip_texts.end()) return it->second;
    const auto& phrases = script_.phrases.empty() ? default_phrases() : script_.phrases;
    auto rng = keyed_rng(script_.seed, kDescribeStream + 1, clip.index, repeat);
    std::uniform_int_distribution<std::size_t> pick(0, phrases.size() - 1);
    const auto& first = phrases[pick(rng)];
    const auto& second = phrases[pick(rng)];
    return fmt::format("Clip {}: I {}. Then I {}.", clip.index, first, second);
}

std::vector<DescribeResult> MockBackend::describe(const BackendProfile& profile, std::span<const Clip> clips,
                                                  std::string_view prompt, const RequestContext& ctx) {
    check_describe_request(profile, clips, prompt);
    std::vector<DescribeResult> results(clips.size());

    if (script_.fail_all) {
        for (auto& r : results) {
            r.stats.batch_share = clips.size();
            r.failure = Failure{FailureKind::injected, *script_.fail_all, 1};
        }
        return results;
    }

    double request_time = 0.0;
    double first_token = 0.0;
    std::size_t total_tokens = 0;
    std::optional<std::uint64_t> peak;
    bool timed_out = false;
    for (std::size_t i = 0; i < clips.size(); ++i) {
        const Clip& clip = clips[i];
        auto rng = keyed_rng(script_.seed, kDescribeStream, clip.index, ctx.repeat);
        const double latency = script_.describe_latency.sample(rng, clip.index - 1);
        const double tps = script_.tokens_per_second.sample(rng, clip.index - 1);
        const double ttft = script_.ttft.sample(rng, clip.index - 1);
        if (i == 0) first_token = ttft;
        if (script_.peak_memory_gb) {
            const double gb = script_.peak_memory_gb->sample(rng, clip.index - 1);
            const auto bytes = static_cast<std::uint64_t>(std::llround(gb * 1e9));
            peak = std::max(peak.value_or(0), bytes);
        }

        DescribeResult& r = results[i];
        if (script_.timeout_clips.contains(clip.index)) {
            timed_out = true;
            r.failure = Failure{FailureKind::timeout, fmt::format("no response within {} s", profile.request_timeout), 1};
            continue;
        }
        if (script_.broken_clips.contains(clip.index)) {
            r.failure = Failure{FailureKind::transport, "connection reset by peer", 2};
            continue;
        }
        request_time += latency;
        const auto tokens = static_cast<std::size_t>(std::max<long long>(1, std::llround(tps * latency)));
        total_tokens += tokens;
        r.tokens = tokens;
        r.text = canned_text(clip, ctx.repeat);
    }
    if (timed_out) request_time = std::max(request_time, profile.request_timeout);

    maybe_sleep(request_time, script_.sleep_scale);

    for (std::size_t i = 0; i < clips.size(); ++i) {
        GenerationStats& st = results[i].stats;
        st.wall_time = request_time;
        st.ttft = std::min(first_token, request_time);
        st.output_tokens = total_tokens;
        st.tokens_per_second = request_time > 0.0 ? static_cast<double>(total_tokens) / request_time : 0.0;
        st.peak_memory_bytes = peak;
        st.batch_share = clips.size();
    }
    return results;
}

Option MockBackend::choose(const QaHint* hint, std::mt19937_64& rng) const {
    const auto random_letter = [&] {
        std::uniform_int_distribution<int> pick(0, 3);
        return kOptions[pick(rng)];
    };
    const AnswerPolicy& policy = script_.answer_policy;
    switch (policy.kind) {
        case AnswerPolicy::Kind::contains:
            if (hint) {
                for (const Candidate& c : hint->candidates)
                    if (!c.text.empty() && hint->memory_text.find(c.text) != std::string_view::npos) return c.label;
            }
            return random_letter();
        case AnswerPolicy::Kind::answer_key:
            if (hint) {
                if (auto it = policy.key.find(std::string(hint->question)); it != policy.key.end()) return it->second;
            }
            return random_letter();
        case AnswerPolicy::Kind::fixed: return policy.fixed;
        case AnswerPolicy::Kind::uniform_random:
        case AnswerPolicy::Kind::raw: return random_letter();
    }
    return Option::A;
}

AnswerResult MockBackend::answer_stream(const BackendProfile& profile, std::string_view prompt,
                                        std::size_t max_new_tokens, const RequestContext& ctx) {
    check_answer_request(prompt, max_new_tokens);
    const std::uint64_t key = ctx.key ? *ctx.key : unkeyed_.fetch_add(1);
    auto rng = keyed_rng(script_.seed, kAnswerStream, key, ctx.repeat);
    AnswerResult out;

    if (script_.fail_all) {
        out.failure = Failure{FailureKind::injected, *script_.fail_all, 1};
        return out;
    }

    const double ttft = script_.ttft.sample(rng, key);
    const QaHint* hint = ctx.qa ? &*ctx.qa : nullptr;
    const Option letter = choose(hint, rng);

    if (script_.answer_failure == FailureKind::ttft_timeout) {
        out.stats.wall_time = profile.request_timeout;
        out.stats.ttft = profile.request_timeout;
        out.first_token_time = profile.request_timeout;
        out.failure = Failure{FailureKind::ttft_timeout, "no token before timeout", 1};
        maybe_sleep(profile.request_timeout, script_.sleep_scale);
        return out;
    }

    std::vector<std::string> tokens;
    if (script_.answer_policy.kind == AnswerPolicy::Kind::raw)
        tokens.push_back(script_.answer_policy.raw_token);
    else
        tokens.emplace_back(1, to_char(letter));
    if (hint) {
        for (const Candidate& c : hint->candidates) {
            if (c.label != letter) continue;
            tokens.push_back(")");
            for (auto& w : split_words(c.text)) tokens.push_back(std::move(w));
        }
    }
    if (tokens.size() > max_new_tokens) tokens.resize(max_new_tokens);

    out.first_token = tokens.front();
    out.first_token_time = ttft;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0 && tokens[i] != ")") out.final_text += ' ';
        out.final_text += tokens[i];
    }
    out.stats.ttft = ttft;
    out.stats.wall_time = ttft + script_.inter_token_time * static_cast<double>(tokens.size() - 1);
    out.stats.output_tokens = tokens.size();
    out.stats.tokens_per_second =
        out.stats.wall_time > 0.0 ? static_cast<double>(tokens.size()) / out.stats.wall_time : 0.0;

    if (script_.answer_failure == FailureKind::partial_answer) {
        out.failure = Failure{FailureKind::partial_answer, "stream closed before completion", 1};
        out.final_text = out.first_token;
        out.stats.output_tokens = 1;
        out.stats.wall_time = ttft;
        out.stats.tokens_per_second = ttft > 0.0 ? 1.0 / ttft : 0.0;
    }
    maybe_sleep(out.stats.wall_time, script_.sleep_scale);
    return out;
}

CapabilityReport MockBackend::probe(const BackendProfile& profile) {
    CapabilityReport report;
    report.backend_id = id_;
    report.model = profile.model_name.empty() ? "mock" : profile.model_name;
    report.streaming = Capability::yes;
    report.image_input = Capability::yes;
    report.context_limit = script_.context_limit;
    return report;
}

}  // namespace oem
