#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "oemstream/backend.hpp"
#include "oemstream/bench.hpp"
#include "oemstream/ingest.hpp"
#include "oemstream/mock_backend.hpp"
#include "oemstream/pipeline.hpp"

namespace oem {

struct BackendSpec {
    std::string kind = "mock";  // "mock" or "http"
    std::string id;
    BackendProfile profile;
    nlohmann::json mock = nlohmann::json::object();  // MockScript fields
};

// Frame source for a stream: a manifest file or a synthetic generator.
struct SourceSpec {
    std::optional<std::filesystem::path> manifest;
    SyntheticSource synthetic;

    std::vector<Frame> frames() const;
};

// One entry of the benchmark stream catalog.
struct StreamSpec {
    std::optional<std::filesystem::path> memory;  // prebuilt memory JSONL
    std::optional<SourceSpec> source;             // otherwise frames to describe
};

struct RunConfig {
    std::string stream_id = "stream";
    BudgetConfig budget;
    ReplayClock clock = ReplayClock::simulated();
    std::filesystem::path descriptor_template;
    std::filesystem::path reasoner_template;
    BackendSpec descriptor;
    BackendSpec reasoner;
    SourceSpec source;
    ViolationPolicy violation_policy = ViolationPolicy::record;
    std::size_t catch_up_threshold = 2;
    std::size_t queue_capacity = 4;
    ExecutionMode execution = ExecutionMode::overlapped;
    RenderOptions render;
    std::filesystem::path output_dir = "out";
    std::vector<Query> queries;
    std::map<std::string, StreamSpec> streams;

    PipelineOptions pipeline_options() const;
    std::string descriptor_prompt() const;
    ReasonerPromptTemplate reasoner_prompt() const;
};

// Relative paths inside the file resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

Query query_from_json(const nlohmann::json& j);

// `seed` replaces the mock script's seed when set. `overrides` is merged
// over the script (sweep points use it). HTTP specs ignore both.
std::shared_ptr<Backend> make_backend(const BackendSpec& spec, std::optional<std::uint64_t> seed = std::nullopt,
                                      const nlohmann::json& overrides = nlohmann::json::object());

BackendFactory make_factory(const RunConfig& config);

// Clips or prebuilt memories for every configured stream; the run's own
// source is registered under `stream_id` when no catalog is given.
StreamCatalog build_catalog(const RunConfig& config);

}  // namespace oem
