#include <gtest/gtest.h>

#include <cmath>

#include "oemstream/error.hpp"
#include "oemstream/mock_backend.hpp"
#include "oemstream/options.hpp"
#include "oemstream/sse.hpp"
#include "oemstream/stats.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace oem;
using testing_support::abcd;
using testing_support::uniform_clips;

namespace {

BackendProfile profile(std::size_t bs = 1) {
    BackendProfile p;
    p.model_name = "vlm-test";
    p.batch_size = bs;
    return p;
}

}  // namespace

TEST(ParseAnswer, AcceptedForms) {
    EXPECT_EQ(parse_answer("B"), Option::B);
    EXPECT_EQ(parse_answer(" c "), Option::C);
    EXPECT_EQ(parse_answer("(D)"), Option::D);
    EXPECT_EQ(parse_answer("a)"), Option::A);
    EXPECT_EQ(parse_answer("D."), Option::D);
    EXPECT_EQ(parse_answer("[b]"), Option::B);
}

TEST(ParseAnswer, UnparseableForms) {
    EXPECT_FALSE(parse_answer(""));
    EXPECT_FALSE(parse_answer("E"));
    EXPECT_FALSE(parse_answer("AB"));
    EXPECT_FALSE(parse_answer("Answer"));
    EXPECT_FALSE(parse_answer("the answer is B"));
    EXPECT_FALSE(parse_answer("   "));
}

TEST(Candidates, JsonForms) {
    const auto expected = abcd("a", "b", "c", "d");
    EXPECT_EQ(candidates_from_json(nlohmann::json::array({"a", "b", "c", "d"})), expected);
    EXPECT_EQ(candidates_from_json(nlohmann::json{{"A", "a"}, {"B", "b"}, {"C", "c"}, {"D", "d"}}), expected);
    EXPECT_EQ(candidates_from_json(candidates_to_json(expected)), expected);
    EXPECT_THROW(candidates_from_json(nlohmann::json::array({"a", "b", "c"})), InputError);
}

TEST(Stats, WelfordMatchesTwoPass) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal(1e6, 3.0);
    std::vector<double> xs;
    RunningStats rs;
    for (int i = 0; i < 5000; ++i) {
        xs.push_back(normal(rng));
        rs.add(xs.back());
    }
    const auto ref = oracle::two_pass(xs);
    EXPECT_NEAR(rs.summary().mean, ref.mean, 1e-6);
    EXPECT_NEAR(rs.summary().stddev, ref.stddev, 1e-6);
    EXPECT_EQ(summarize(std::span<const double>()).count, 0u);
    const double one[] = {4.0};
    EXPECT_EQ(summarize(one).stddev, 0.0);
}

TEST(Estimate, FourBytesPerToken) {
    EXPECT_EQ(estimate_tokens(""), 0u);
    EXPECT_EQ(estimate_tokens("abcd"), 1u);
    EXPECT_EQ(estimate_tokens("abcde"), 2u);
}

TEST(MockBackend, DescribeIsDeterministicPerSeed) {
    MockScript s;
    s.seed = 42;
    s.describe_latency = Distribution::gaussian(14.80, 1.91);
    MockBackend a(s), b(s);
    const auto clips = uniform_clips(6);
    const auto prof = profile();
    for (const auto& c : clips) {
        const auto ra = a.describe(prof, std::span(&c, 1), "p");
        const auto rb = b.describe(prof, std::span(&c, 1), "p");
        EXPECT_EQ(ra[0].text, rb[0].text);
        EXPECT_EQ(ra[0].stats.wall_time, rb[0].stats.wall_time);
    }
    s.seed = 43;
    MockBackend other(s);
    const auto r1 = a.describe(prof, std::span(&clips[0], 1), "p");
    const auto r2 = other.describe(prof, std::span(&clips[0], 1), "p");
    EXPECT_NE(r1[0].stats.wall_time, r2[0].stats.wall_time);
}

TEST(MockBackend, GaussianLatencyMatchesScriptedMean) {
    MockScript s;
    s.seed = 3;
    s.describe_latency = Distribution::gaussian(14.80, 1.91);
    MockBackend m(s);
    const auto clips = uniform_clips(1000);
    RunningStats rs;
    for (const auto& c : clips) rs.add(m.describe(profile(), std::span(&c, 1), "p")[0].stats.wall_time);
    EXPECT_NEAR(rs.summary().mean, 14.80, 3.0 * 1.91 / std::sqrt(1000.0));
    EXPECT_NEAR(rs.summary().stddev, 1.91, 0.15);
}

TEST(MockBackend, BatchKeepsOrderAndAmortizes) {
    MockScript s;
    s.describe_latency = Distribution::constant(4.0);
    MockBackend m(s);
    const auto clips = uniform_clips(4);
    const auto r = m.describe(profile(4), clips, "p");
    ASSERT_EQ(r.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NE(r[i].text.find("Clip " + std::to_string(i + 1) + ":"), std::string::npos);
        EXPECT_DOUBLE_EQ(r[i].stats.wall_time, 16.0);
        EXPECT_DOUBLE_EQ(r[i].stats.per_clip_time(), 4.0);
    }
    EXPECT_THROW(m.describe(profile(2), clips, "p"), InputError);
    EXPECT_THROW(m.describe(profile(4), clips, ""), InputError);
}

TEST(MockBackend, BatchingDoesNotChangeTexts) {
    MockScript s;
    s.seed = 9;
    MockBackend m(s);
    const auto clips = uniform_clips(4);
    const auto batched = m.describe(profile(4), clips, "p");
    for (std::size_t i = 0; i < 4; ++i)
        EXPECT_EQ(m.describe(profile(), std::span(&clips[i], 1), "p")[0].text, batched[i].text);
}

TEST(MockBackend, ContainsPolicyFindsCandidateInMemory) {
    MockBackend m(MockScript{});
    const auto cands = abcd("in the fridge", "on the blue table", "under the bed", "in the car");
    RequestContext ctx;
    ctx.key = 1;
    ctx.qa = QaHint{"I put the keys on the blue table.", "Where are the keys?", cands};
    const auto r = m.answer_stream(profile(), "prompt", 1, ctx);
    EXPECT_EQ(r.final_text, "B");
    EXPECT_EQ(r.first_token, "B");
    EXPECT_EQ(r.stats.output_tokens, 1u);
    EXPECT_LE(r.first_token_time, r.stats.wall_time);
}

TEST(MockBackend, LongerAnswersWhenAllowed) {
    MockScript s;
    s.answer_policy.kind = AnswerPolicy::Kind::fixed;
    s.answer_policy.fixed = Option::C;
    MockBackend m(s);
    const auto cands = abcd("a", "b", "under the bed", "d");
    RequestContext ctx;
    ctx.qa = QaHint{"", "q", cands};
    const auto r = m.answer_stream(profile(), "prompt", 16, ctx);
    EXPECT_EQ(r.final_text, "C) under the bed");
    EXPECT_GT(r.stats.wall_time, r.stats.ttft);
}

TEST(MockBackend, AnswerDrawsKeyedNotOrdered) {
    MockScript s;
    s.ttft = Distribution::gaussian(0.5, 0.2);
    MockBackend a(s), b(s);
    RequestContext k1, k2;
    k1.key = 11;
    k2.key = 22;
    const auto a1 = a.answer_stream(profile(), "p", 1, k1);
    const auto a2 = a.answer_stream(profile(), "p", 1, k2);
    const auto b2 = b.answer_stream(profile(), "p", 1, k2);
    const auto b1 = b.answer_stream(profile(), "p", 1, k1);
    EXPECT_EQ(a1.stats.ttft, b1.stats.ttft);
    EXPECT_EQ(a2.stats.ttft, b2.stats.ttft);
}

TEST(MockBackend, FailureInjection) {
    MockScript s;
    s.timeout_clips = {2};
    s.broken_clips = {3};
    MockBackend m(s);
    auto prof = profile();
    prof.request_timeout = 30.0;
    const auto clips = uniform_clips(3);
    EXPECT_FALSE(m.describe(prof, std::span(&clips[0], 1), "p")[0].failure);
    const auto t = m.describe(prof, std::span(&clips[1], 1), "p")[0];
    ASSERT_TRUE(t.failure);
    EXPECT_EQ(t.failure->kind, FailureKind::timeout);
    EXPECT_DOUBLE_EQ(t.stats.wall_time, 30.0);
    const auto b = m.describe(prof, std::span(&clips[2], 1), "p")[0];
    ASSERT_TRUE(b.failure);
    EXPECT_EQ(b.failure->kind, FailureKind::transport);
    EXPECT_EQ(b.failure->attempts, 2);

    s = MockScript{};
    s.answer_failure = FailureKind::partial_answer;
    MockBackend p(s);
    const auto ans = p.answer_stream(prof, "p", 1);
    ASSERT_TRUE(ans.failure);
    EXPECT_EQ(ans.failure->kind, FailureKind::partial_answer);
}

TEST(MockBackend, ProbeReportsCapabilities) {
    MockScript s;
    s.context_limit = 4096;
    MockBackend m(s, "m1");
    const auto r = m.probe(profile());
    EXPECT_EQ(r.backend_id, "m1");
    EXPECT_EQ(r.streaming, Capability::yes);
    EXPECT_EQ(r.context_limit, 4096u);
}

TEST(MockBackend, ScriptFromJson) {
    const auto s = nlohmann::json::parse(R"({
        "seed": 5, "describe_latency": {"mean": 9.31, "std": 1.39}, "ttft": [0.1, 0.2],
        "peak_memory_gb": 18.2, "answer_policy": {"kind": "fixed", "letter": "D"},
        "timeout_clips": [4], "answer_failure": "ttft-timeout"})").get<MockScript>();
    EXPECT_EQ(s.seed, 5u);
    EXPECT_EQ(s.describe_latency.kind, Distribution::Kind::gaussian);
    EXPECT_EQ(s.ttft.values.size(), 2u);
    ASSERT_TRUE(s.peak_memory_gb);
    EXPECT_EQ(s.answer_policy.fixed, Option::D);
    EXPECT_TRUE(s.timeout_clips.contains(4));
    EXPECT_EQ(s.answer_failure, FailureKind::ttft_timeout);
    EXPECT_THROW(nlohmann::json::parse(R"({"answer_policy": "psychic"})").get<MockScript>(), ConfigError);
    EXPECT_THROW(nlohmann::json::parse(R"({"describe_latency": [-1]})").get<MockScript>(), ConfigError);
}

TEST(Sse, ParsesChunkedStream) {
    std::vector<SseEvent> got;
    SseParser p([&](const SseEvent& e) {
        got.push_back(e);
        return true;
    });
    const std::string wire = "id: 1\nevent: entry\ndata: {\"a\":1}\n\n: keep-alive\n\ndata: line1\ndata: line2\n\n";
    for (char c : wire) p.feed(std::string_view(&c, 1));
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0].event, "entry");
    EXPECT_EQ(got[0].id, "1");
    EXPECT_EQ(got[0].data, "{\"a\":1}");
    EXPECT_EQ(got[1].data, "line1\nline2");
    EXPECT_EQ(p.last_event_id(), "1");
}

TEST(Sse, CrLfAndStop) {
    int n = 0;
    SseParser p([&](const SseEvent&) { return ++n < 1; });
    EXPECT_FALSE(p.feed("data: x\r\n\r\ndata: y\r\n\r\n"));
    EXPECT_EQ(n, 1);
}

TEST(Sse, FormatRoundTrip) {
    const SseEvent ev{"entry", "a\nb", "7"};
    std::vector<SseEvent> got;
    SseParser p([&](const SseEvent& e) {
        got.push_back(e);
        return true;
    });
    p.feed(format_sse(ev));
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].event, ev.event);
    EXPECT_EQ(got[0].data, ev.data);
    EXPECT_EQ(got[0].id, ev.id);
}
