#include <gtest/gtest.h>

#include "oemstream/config.hpp"
#include "oemstream/error.hpp"
#include "support.hpp"

using namespace oem;

TEST(Config, LoadsSampleRun) {
    const auto c = load_run_config(testing_support::fixture("sample_run.json"));
    EXPECT_EQ(c.stream_id, "kitchen");
    EXPECT_DOUBLE_EQ(c.budget.s, 15.0);
    EXPECT_EQ(c.clock.mode(), ClockMode::simulated);
    EXPECT_EQ(c.descriptor.profile.batch_size, 2u);
    EXPECT_EQ(c.descriptor.profile.model_name, "vlm-8b");
    ASSERT_EQ(c.queries.size(), 2u);
    EXPECT_EQ(c.queries[0].submit_time, 60.0);
    EXPECT_FALSE(c.queries[1].submit_time);
    EXPECT_EQ(c.source.frames().size(), 3600u);
    EXPECT_FALSE(c.descriptor_prompt().empty());
    EXPECT_NO_THROW(c.reasoner_prompt().validate());
    EXPECT_TRUE(c.output_dir.is_absolute() || c.output_dir.string().find("sample_out") != std::string::npos);
}

TEST(Config, Defaults) {
    const auto c = parse_run_config(nlohmann::json::object());
    EXPECT_DOUBLE_EQ(c.budget.t_r, 1.0);
    EXPECT_EQ(c.descriptor.kind, "mock");
    EXPECT_EQ(c.violation_policy, ViolationPolicy::record);
    EXPECT_EQ(c.execution, ExecutionMode::overlapped);
}

TEST(Config, WallClockMocksSleep) {
    const auto c = parse_run_config(nlohmann::json::parse(R"({"clock": {"mode": "accelerated", "factor": 20}})"));
    EXPECT_DOUBLE_EQ(c.descriptor.mock.at("sleep_scale").get<double>(), 0.05);
    const auto v = parse_run_config(nlohmann::json::parse(R"({"clock": {"mode": "simulated"}})"));
    EXPECT_DOUBLE_EQ(v.descriptor.mock.at("sleep_scale").get<double>(), 0.0);
}

TEST(Config, RejectsBadValues) {
    const char* bad[] = {
        R"({"budget": {"s": 0}})",
        R"({"budget": {"t_r": -1}})",
        R"({"clock": {"mode": "warp"}})",
        R"({"descriptor": {"kind": "grpc"}})",
        R"({"descriptor": {"kind": "http"}})",
        R"({"descriptor": {"profile": {"batch_size": 0}}})",
        R"({"pipeline": {"violation_policy": "panic"}})",
        R"({"pipeline": {"queue_capacity": 0}})",
        R"({"queries": [{"question": "q", "candidates": ["a", "b"]}]})",
        R"({"source": {"synthetic": {"fps": 0}}})",
    };
    for (const char* text : bad) EXPECT_THROW(parse_run_config(nlohmann::json::parse(text)), ConfigError) << text;
    EXPECT_THROW(load_run_config("/nonexistent/run.json"), ConfigError);
}

TEST(Config, MakeBackendAppliesSeedAndOverrides) {
    const auto c = parse_run_config(nlohmann::json::parse(R"({"descriptor": {"mock": {"seed": 1, "describe_latency": 3.0}}})"));
    auto b = make_backend(c.descriptor, 99, {{"describe_latency", 7.0}});
    auto* mock = dynamic_cast<MockBackend*>(b.get());
    ASSERT_NE(mock, nullptr);
    EXPECT_EQ(mock->script().seed, 99u);
    EXPECT_DOUBLE_EQ(mock->script().describe_latency.mean, 7.0);
}

TEST(Config, CatalogFromStreams) {
    const auto dir = testing_support::scratch("catalog");
    TextualMemory m("s");
    m.append(testing_support::entry(1, "x"));
    persist(m.snapshot(), dir / "s.jsonl");
    const auto c = parse_run_config(
        nlohmann::json::parse(R"({"streams": {"prebuilt": {"memory": "s.jsonl"}, "live": {"duration": 30, "fps": 10}}})"),
        dir);
    const auto catalog = build_catalog(c);
    ASSERT_EQ(catalog.size(), 2u);
    ASSERT_TRUE(catalog.at("prebuilt").entries);
    EXPECT_EQ(catalog.at("prebuilt").entries->size(), 1u);
    EXPECT_EQ(catalog.at("live").clips.size(), 2u);
}
