#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "oemstream/backend.hpp"
#include "oemstream/bounded_queue.hpp"
#include "oemstream/event_log.hpp"
#include "oemstream/ingest.hpp"
#include "oemstream/memory.hpp"
#include "oemstream/options.hpp"
#include "oemstream/prompts.hpp"

namespace oem {

struct BudgetConfig {
    double s = 15.0;   // clip duration; a description must take strictly less
    double t_r = 1.0;  // answer latency budget; an answer must take strictly less

    void validate() const;
};

enum class ViolationKind { descriptor_budget, qa_budget };
enum class ViolationPolicy { record, drop_to_catch_up };
enum class ExecutionMode { overlapped, exclusive };

const char* to_string(ViolationKind k);
const char* to_string(ViolationPolicy p);
const char* to_string(ExecutionMode m);
ViolationPolicy violation_policy_from_string(const std::string& s);
ExecutionMode execution_mode_from_string(const std::string& s);

struct ViolationRecord {
    ViolationKind kind = ViolationKind::descriptor_budget;
    std::optional<std::size_t> clip_index;
    std::optional<std::string> query_id;
    double observed = 0.0;  // seconds, always >= budget
    double budget = 0.0;
    std::size_t backlog_depth = 0;
    Micros stream_time{0};
};

nlohmann::json to_json(const ViolationRecord& v);

struct Query {
    std::string query_id;
    std::string question;
    std::vector<Candidate> candidates;
    // Stream time of submission in seconds. On wall clocks it defaults to
    // "now"; on virtual clocks it defaults to the end of the stream.
    std::optional<double> submit_time;
};

struct AnswerRecord {
    std::string query_id;
    std::optional<Option> chosen;  // nullopt: unparseable or failed
    std::string raw_first_token;
    std::string final_text;
    double ttft = 0.0;
    double total_time = 0.0;  // T_ans
    std::size_t memory_length_used = 0;
    bool truncated = false;
    std::optional<std::string> failure;
    double submit_time = 0.0;  // stream seconds
    double answered_at = 0.0;  // stream seconds
    bool budget_violated = false;

    bool unparseable() const noexcept { return !chosen.has_value(); }
};

void to_json(nlohmann::json& j, const AnswerRecord& r);
void from_json(const nlohmann::json& j, AnswerRecord& r);

struct QueryAnswer {
    AnswerRecord record;
    std::optional<ViolationRecord> violation;
};

/// Answers one query from a memory view: renders the view, drops the oldest
/// entries if the prompt would exceed `context_limit` tokens, and asks the
/// reasoner for exactly one token. A violation is reported when T_ans >= t_r.
QueryAnswer answer_query(const Query& query, Backend& reasoner, const BackendProfile& profile,
                         const ReasonerPromptTemplate& tpl, const MemoryView& view, const BudgetConfig& budget,
                         const RenderOptions& render = {}, std::optional<std::size_t> context_limit = std::nullopt,
                         std::uint64_t repeat = 0);

// Stable 64-bit FNV-1a, used to key per-query draws.
std::uint64_t stable_hash(std::string_view s);

struct PipelineOptions {
    BudgetConfig budget;
    ReplayClock clock = ReplayClock::simulated();
    ViolationPolicy violation_policy = ViolationPolicy::record;
    std::size_t catch_up_threshold = 2;
    std::size_t queue_capacity = 4;
    ExecutionMode execution = ExecutionMode::overlapped;
    RenderOptions render;
    BackendProfile descriptor_profile;
    BackendProfile reasoner_profile;
    std::uint64_t repeat = 0;  // forwarded to backends; sweeps vary it per run
};

struct PipelineStatus {
    std::size_t clips_total = 0;
    std::size_t clips_arrived = 0;
    std::size_t clips_completed = 0;
    std::size_t backlog_depth = 0;
    std::size_t memory_length = 0;
    std::size_t descriptor_violations = 0;
    std::size_t qa_violations = 0;
    std::size_t queries_pending = 0;
    std::size_t queries_answered = 0;
    bool descriptor_done = false;
};

nlohmann::json to_json(const PipelineStatus& s, const PipelineOptions& o);

/// Two-worker streaming engine.
///
/// An ingest thread paces clips onto a bounded queue, the descriptor worker
/// turns them into memory entries in order, and a single QA lane answers
/// queries from memory snapshots. The workers share only the memory and the
/// event log. On virtual clocks both workers keep their own discrete-event
/// timelines, so results do not depend on thread scheduling.
class Pipeline {
public:
    Pipeline(PipelineOptions options, std::shared_ptr<Backend> descriptor, std::shared_ptr<Backend> reasoner,
             std::string descriptor_prompt, ReasonerPromptTemplate reasoner_template, TextualMemory& memory,
             EventLog& log);
    ~Pipeline();

    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    void start(std::vector<Clip> clips);

    // Throws InputError for malformed queries (wrong candidate count/labels).
    std::future<AnswerRecord> submit(Query query);

    // Blocks until every clip is described and every submitted query answered.
    void finish();
    // Stops ingest early; in-flight work completes. finish() still applies.
    void request_stop();

    bool descriptor_done() const;
    PipelineStatus status() const;
    const PipelineOptions& options() const noexcept { return opts_; }

    std::vector<ViolationRecord> violations() const;
    std::vector<AnswerRecord> answers() const;
    // Request stats for each memory entry, in clip order (skipped clips carry zeros).
    std::vector<GenerationStats> clip_stats() const;

private:
    struct Arrival {
        Clip clip;
        Micros time{0};
    };
    struct PendingQuery {
        Query query;
        std::promise<AnswerRecord> promise;
        std::optional<MemoryView> view;  // captured at submission on wall clocks
        Micros submit{0};
        bool submit_at_end = false;
    };

    void ingest_loop();
    void descriptor_loop();
    void qa_loop();
    void describe_batch(std::vector<Arrival>& batch, Micros& prev_finish);
    void skip_clip(const Arrival& a, Micros at, std::size_t depth);
    std::size_t arrivals_before(Micros t) const;   // arrivals strictly before t
    std::size_t arrivals_through(Micros t) const;  // arrivals at or before t
    Micros now_or(Micros virtual_time) const;

    PipelineOptions opts_;
    std::shared_ptr<Backend> descriptor_;
    std::shared_ptr<Backend> reasoner_;
    std::string descriptor_prompt_;
    ReasonerPromptTemplate reasoner_template_;
    TextualMemory& memory_;
    EventLog& log_;
    std::optional<std::size_t> context_limit_;

    std::vector<Clip> clips_;
    std::vector<Micros> availability_;  // per clip, nondecreasing
    BoundedQueue<Arrival> queue_;

    mutable std::mutex mu_;
    std::condition_variable progress_cv_;
    std::condition_variable query_cv_;
    std::size_t arrived_ = 0;
    std::size_t completed_ = 0;
    std::vector<Micros> finish_times_;
    Micros last_finish_{0};
    bool descriptor_done_ = false;
    bool queries_closed_ = false;
    std::deque<PendingQuery> pending_;
    std::size_t in_flight_queries_ = 0;
    std::vector<ViolationRecord> violations_;
    std::vector<AnswerRecord> answers_;
    std::vector<GenerationStats> clip_stats_;

    std::mutex backend_mu_;  // held around backend calls in exclusive mode
    std::atomic<bool> stop_{false};
    std::condition_variable stop_cv_;
    bool started_ = false;
    bool finished_ = false;

    std::thread ingest_thread_;
    std::thread descriptor_thread_;
    std::thread qa_thread_;
};

struct DescriptorRun {
    std::vector<ViolationRecord> violations;
    std::vector<GenerationStats> clip_stats;
};

// Runs only the descriptor side over `clips` until every clip is described.
DescriptorRun run_descriptor_worker(std::vector<Clip> clips, std::shared_ptr<Backend> backend,
                                    const std::string& prompt, TextualMemory& memory, EventLog& log,
                                    PipelineOptions options);

}  // namespace oem
