#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "oemstream/backend.hpp"
#include "oemstream/ingest.hpp"
#include "oemstream/memory.hpp"
#include "oemstream/options.hpp"
#include "oemstream/pipeline.hpp"
#include "oemstream/prompts.hpp"
#include "oemstream/stats.hpp"

namespace oem {

// ---------------------------------------------------------------------------
// Accuracy benchmark

struct BenchmarkItem {
    std::string item_id;
    std::string stream_id;
    std::string question;
    std::vector<Candidate> candidates;
    Option correct = Option::A;
    std::optional<double> query_time;  // stream seconds; end of stream when absent

    void validate() const;
};

void to_json(nlohmann::json& j, const BenchmarkItem& item);
void from_json(const nlohmann::json& j, BenchmarkItem& item);

// JSONL, one item per line. Throws LoadError citing the offending line.
std::vector<BenchmarkItem> load_items(const std::filesystem::path& path);

// What a stream id resolves to: a prebuilt memory (answered directly) or
// clips (described by the pipeline first).
struct StreamSource {
    std::optional<std::vector<MemoryEntry>> entries;
    std::vector<Clip> clips;
};

using StreamCatalog = std::map<std::string, StreamSource>;

enum class BackendRole { descriptor, reasoner };

// Builds a fresh backend for one seed of a campaign.
using BackendFactory = std::function<std::shared_ptr<Backend>(BackendRole role, std::uint64_t seed)>;

struct BenchmarkConfig {
    PipelineOptions pipeline;
    std::string descriptor_prompt;
    ReasonerPromptTemplate reasoner_template;
    BackendFactory factory;
};

struct AuditEntry {
    std::string item_id;
    std::string stream_id;
    std::string reason;
};

struct ScoredAnswer {
    std::string item_id;
    Option correct = Option::A;
    bool is_correct = false;
    AnswerRecord record;
};

struct SeedResult {
    std::uint64_t seed = 0;
    std::size_t correct = 0;
    std::size_t total = 0;
    std::size_t unparseable = 0;
    double accuracy = 0.0;  // percent
    std::vector<ScoredAnswer> answers;
};

struct BenchmarkReport {
    std::vector<SeedResult> per_seed;
    Summary accuracy;  // percent, sample std across seeds
    std::vector<AuditEntry> audit;
};

/// Scores every item once per seed. Items whose stream is missing from the
/// catalog are excluded from the denominator and listed in `audit`.
BenchmarkReport run_benchmark(std::span<const BenchmarkItem> items, const StreamCatalog& streams,
                              const BenchmarkConfig& config, std::span<const std::uint64_t> seeds);

nlohmann::json to_json(const ScoredAnswer& a);
// One JSON object per answer, tagged with its seed, in seed then item order.
std::string answers_to_jsonl(const BenchmarkReport& report);

// ---------------------------------------------------------------------------
// TTFT campaign

struct TtftOptions {
    std::size_t n_queries = 100;
    std::string question = "Where did I leave the keys?";
    std::vector<Candidate> candidates = {{Option::A, "on the table"},
                                         {Option::B, "in the fridge"},
                                         {Option::C, "on the sofa"},
                                         {Option::D, "in the jacket"}};
    std::uint64_t repeat = 0;
};

struct TtftReport {
    Summary ttft;        // successful samples only
    Summary total_time;  // T_ans of successful samples
    std::size_t failures = 0;
    std::vector<AnswerRecord> samples;
};

/// Issues `n_queries` single-token answer requests, cycling over the memory
/// fixtures (an empty memory when none are given). Throws InputError for
/// n_queries == 0 and CampaignError when every sample fails.
TtftReport measure_ttft(Backend& backend, const BackendProfile& profile, const ReasonerPromptTemplate& tpl,
                        std::span<const MemoryView> fixtures, const TtftOptions& options,
                        const BudgetConfig& budget = {});

// ---------------------------------------------------------------------------
// Configuration sweep

struct SweepAxes {
    std::string model_name;
    double fps = 2.0;
    Resolution resolution{768, 1024};
    std::size_t batch_size = 1;
    std::string quantization_label = "full";
    nlohmann::json backend_override = nlohmann::json::object();  // merged into the point's mock script

    std::string label() const;
};

void to_json(nlohmann::json& j, const SweepAxes& a);
void from_json(const nlohmann::json& j, SweepAxes& a);

// Accepts a JSON array of points or {"points": [...]}.
std::vector<SweepAxes> load_grid(const std::filesystem::path& path);

struct SweepRow {
    SweepAxes axes;
    Summary time_per_clip;  // seconds, over every clip of every repeat
    Summary tokens_per_second;
    std::optional<Summary> peak_memory_gb;
    double violating_clip_fraction = 0.0;  // clips with T_des >= s
    bool compliant = false;                // mean time per clip < s
    bool failed = false;
    std::string failure;
};

struct MetricsTable {
    std::vector<SweepRow> rows;
    std::optional<std::size_t> selected;
    double budget_s = 15.0;
};

using PointBackendFactory = std::function<std::shared_ptr<Backend>(const SweepAxes& point)>;

struct SweepConfig {
    PipelineOptions base;  // budget and non-grid profile fields
    std::string descriptor_prompt;
    PointBackendFactory factory;
    std::size_t repeats = 10;
};

/// Runs every point sequentially. Frames are re-segmented at each point's
/// fps; each repeat describes the whole clip set on a simulated clock. A
/// point with no successful clip becomes a failed row.
MetricsTable run_sweep(std::span<const SweepAxes> grid, std::span<const Frame> frames, const SweepConfig& config);

bool axes_less(const SweepAxes& a, const SweepAxes& b);

enum class SelectionCriterion { fps_desc, resolution_desc, model_size_desc, time_asc };

struct SelectionPolicy {
    std::vector<SelectionCriterion> order;

    static SelectionPolicy fidelity();       // fps, then resolution, then time
    static SelectionPolicy largest_model();  // model size, then time
    static SelectionPolicy from_string(const std::string& name);
};

// Parameter count parsed from a model name ("vlm-8b" -> 8). 0 when absent.
double model_size(std::string_view model_name);

// Index of the best compliant, non-failed row; nullopt when none is feasible.
// Throws InputError for an empty table.
std::optional<std::size_t> select_configuration(const MetricsTable& table, const SelectionPolicy& policy);

}  // namespace oem
