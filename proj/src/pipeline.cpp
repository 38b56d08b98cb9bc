#include "oemstream/pipeline.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "oemstream/error.hpp"

namespace oem {

void BudgetConfig::validate() const {
    if (!(s > 0.0)) throw ConfigError("budget: s must be positive");
    if (!(t_r > 0.0)) throw ConfigError("budget: t_r must be positive");
}

const char* to_string(ViolationKind k) {
    return k == ViolationKind::descriptor_budget ? "descriptor_budget" : "qa_budget";
}

const char* to_string(ViolationPolicy p) {
    return p == ViolationPolicy::record ? "record" : "drop-to-catch-up";
}

const char* to_string(ExecutionMode m) { return m == ExecutionMode::overlapped ? "overlapped" : "exclusive"; }

ViolationPolicy violation_policy_from_string(const std::string& s) {
    if (s == "record") return ViolationPolicy::record;
    if (s == "drop-to-catch-up") return ViolationPolicy::drop_to_catch_up;
    throw ConfigError("unknown violation policy '" + s + "'");
}

ExecutionMode execution_mode_from_string(const std::string& s) {
    if (s == "overlapped") return ExecutionMode::overlapped;
    if (s == "exclusive") return ExecutionMode::exclusive;
    throw ConfigError("unknown execution mode '" + s + "'");
}

nlohmann::json to_json(const ViolationRecord& v) {
    nlohmann::json j{{"kind", to_string(v.kind)},
                     {"observed", v.observed},
                     {"budget", v.budget},
                     {"backlog_depth", v.backlog_depth},
                     {"t_us", v.stream_time.count()}};
    if (v.clip_index) j["clip"] = *v.clip_index;
    if (v.query_id) j["query_id"] = *v.query_id;
    return j;
}

void to_json(nlohmann::json& j, const AnswerRecord& r) {
    j = nlohmann::json{{"query_id", r.query_id},
                       {"chosen", r.chosen ? nlohmann::json(std::string(1, to_char(*r.chosen))) : nlohmann::json()},
                       {"raw_first_token", r.raw_first_token},
                       {"final_text", r.final_text},
                       {"ttft", r.ttft},
                       {"total_time", r.total_time},
                       {"memory_length_used", r.memory_length_used},
                       {"truncated", r.truncated},
                       {"submit_time", r.submit_time},
                       {"answered_at", r.answered_at},
                       {"budget_violated", r.budget_violated}};
    if (r.failure) j["failure"] = *r.failure;
}

void from_json(const nlohmann::json& j, AnswerRecord& r) {
    r.query_id = j.at("query_id").get<std::string>();
    r.chosen.reset();
    if (const auto& c = j.at("chosen"); c.is_string() && c.get<std::string>().size() == 1)
        r.chosen = option_from_char(c.get<std::string>()[0]);
    r.raw_first_token = j.at("raw_first_token").get<std::string>();
    r.final_text = j.value("final_text", std::string{});
    r.ttft = j.at("ttft").get<double>();
    r.total_time = j.at("total_time").get<double>();
    r.memory_length_used = j.at("memory_length_used").get<std::size_t>();
    r.truncated = j.at("truncated").get<bool>();
    r.submit_time = j.value("submit_time", 0.0);
    r.answered_at = j.value("answered_at", 0.0);
    r.budget_violated = j.value("budget_violated", false);
    if (j.contains("failure")) r.failure = j.at("failure").get<std::string>();
}

std::uint64_t stable_hash(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

QueryAnswer answer_query(const Query& query, Backend& reasoner, const BackendProfile& profile,
                         const ReasonerPromptTemplate& tpl, const MemoryView& view, const BudgetConfig& budget,
                         const RenderOptions& render, std::optional<std::size_t> context_limit,
                         std::uint64_t repeat) {
    validate_candidates(query.candidates);

    std::vector<std::string> blocks;
    blocks.reserve(view.size());
    for (const MemoryEntry& e : view) blocks.push_back(render_entry(e, render));

    std::size_t dropped = 0;
    bool truncated = false;
    if (context_limit) {
        const std::size_t overhead = build_reasoner_prompt(tpl, "", query.question, query.candidates).size();
        std::size_t bytes = overhead;
        for (std::size_t i = 0; i < blocks.size(); ++i) bytes += blocks[i].size() + (i > 0 ? 2 : 0);
        while (dropped < blocks.size() && estimate_tokens(bytes) > *context_limit) {
            bytes -= blocks[dropped].size() + (dropped + 1 < blocks.size() ? 2 : 0);
            ++dropped;
            truncated = true;
        }
        if (estimate_tokens(overhead) > *context_limit) truncated = true;
    }

    std::string memory_text;
    for (std::size_t i = dropped; i < blocks.size(); ++i) {
        if (i > dropped) memory_text += "\n\n";
        memory_text += blocks[i];
    }
    const std::string prompt = build_reasoner_prompt(tpl, memory_text, query.question, query.candidates);

    RequestContext ctx;
    ctx.key = stable_hash(query.query_id);
    ctx.repeat = repeat;
    ctx.qa = QaHint{memory_text, query.question, query.candidates};
    const AnswerResult res = reasoner.answer_stream(profile, prompt, 1, ctx);

    QueryAnswer out;
    AnswerRecord& r = out.record;
    r.query_id = query.query_id;
    r.raw_first_token = res.first_token;
    r.final_text = res.final_text;
    r.chosen = res.first_token.empty() ? std::nullopt : parse_answer(res.first_token);
    r.ttft = res.stats.ttft;
    r.total_time = res.stats.wall_time;
    r.memory_length_used = blocks.size() - dropped;
    r.truncated = truncated;
    if (res.failure) r.failure = res.failure->describe();
    if (r.total_time >= budget.t_r) {
        r.budget_violated = true;
        ViolationRecord v;
        v.kind = ViolationKind::qa_budget;
        v.query_id = query.query_id;
        v.observed = r.total_time;
        v.budget = budget.t_r;
        out.violation = v;
    }
    return out;
}

nlohmann::json to_json(const PipelineStatus& s, const PipelineOptions& o) {
    return {{"clips_total", s.clips_total},
            {"clips_arrived", s.clips_arrived},
            {"clips_completed", s.clips_completed},
            {"backlog_depth", s.backlog_depth},
            {"memory_length", s.memory_length},
            {"descriptor_done", s.descriptor_done},
            {"queries_pending", s.queries_pending},
            {"queries_answered", s.queries_answered},
            {"budgets", {{"s", o.budget.s}, {"t_r", o.budget.t_r}}},
            {"violations", {{"descriptor_budget", s.descriptor_violations}, {"qa_budget", s.qa_violations}}},
            {"clock", to_string(o.clock.mode())},
            {"execution", to_string(o.execution)},
            {"violation_policy", to_string(o.violation_policy)},
            {"open_ended", false}};
}

Pipeline::Pipeline(PipelineOptions options, std::shared_ptr<Backend> descriptor, std::shared_ptr<Backend> reasoner,
                   std::string descriptor_prompt, ReasonerPromptTemplate reasoner_template, TextualMemory& memory,
                   EventLog& log)
    : opts_(std::move(options)),
      descriptor_(std::move(descriptor)),
      reasoner_(std::move(reasoner)),
      descriptor_prompt_(std::move(descriptor_prompt)),
      reasoner_template_(std::move(reasoner_template)),
      memory_(memory),
      log_(log),
      queue_(opts_.queue_capacity) {
    opts_.budget.validate();
    opts_.descriptor_profile.validate();
    if (!descriptor_) throw ConfigError("pipeline needs a descriptor backend");
    if (descriptor_prompt_.empty()) throw ConfigError("pipeline needs a descriptor prompt");
    if (reasoner_) {
        opts_.reasoner_profile.validate();
        reasoner_template_.validate();
        context_limit_ = opts_.reasoner_profile.context_limit_tokens;
        if (!context_limit_) {
            try {
                context_limit_ = reasoner_->probe(opts_.reasoner_profile).context_limit;
            } catch (const std::exception&) {
                // Unknown limit: no truncation.
            }
        }
    }
}

Pipeline::~Pipeline() {
    request_stop();
    try {
        finish();
    } catch (...) {
    }
}

void Pipeline::start(std::vector<Clip> clips) {
    std::lock_guard lock(mu_);
    if (started_) throw std::logic_error("pipeline already started");
    started_ = true;
    clips_ = std::move(clips);
    availability_.clear();
    for (const Clip& c : clips_) availability_.push_back(opts_.clock.availability(c));
    opts_.clock.start();
    ingest_thread_ = std::thread([this] { ingest_loop(); });
    descriptor_thread_ = std::thread([this] { descriptor_loop(); });
    qa_thread_ = std::thread([this] { qa_loop(); });
}

void Pipeline::request_stop() {
    stop_ = true;
    stop_cv_.notify_all();
}

void Pipeline::finish() {
    {
        std::lock_guard lock(mu_);
        if (!started_ || finished_) return;
        finished_ = true;
    }
    if (ingest_thread_.joinable()) ingest_thread_.join();
    if (descriptor_thread_.joinable()) descriptor_thread_.join();
    {
        std::lock_guard lock(mu_);
        queries_closed_ = true;
    }
    query_cv_.notify_all();
    if (qa_thread_.joinable()) qa_thread_.join();
}

Micros Pipeline::now_or(Micros virtual_time) const {
    return opts_.clock.is_virtual() ? virtual_time : opts_.clock.stream_now();
}

std::size_t Pipeline::arrivals_before(Micros t) const {
    return static_cast<std::size_t>(std::lower_bound(availability_.begin(), availability_.end(), t) -
                                    availability_.begin());
}

std::size_t Pipeline::arrivals_through(Micros t) const {
    return static_cast<std::size_t>(std::upper_bound(availability_.begin(), availability_.end(), t) -
                                    availability_.begin());
}

void Pipeline::ingest_loop() {
    ClipReplayer replayer(clips_);
    const bool virtual_clock = opts_.clock.is_virtual();
    while (!replayer.exhausted() && !stop_) {
        if (!virtual_clock) {
            const auto when = opts_.clock.wall_time_of(opts_.clock.availability(*replayer.peek()));
            std::unique_lock lock(mu_);
            if (stop_cv_.wait_until(lock, when, [this] { return stop_.load(); })) break;
        }
        std::optional<Clip> clip = replayer.next_available(opts_.clock);
        if (!clip) {
            std::this_thread::sleep_for(std::chrono::microseconds(100));
            continue;
        }
        const Micros at = virtual_clock ? opts_.clock.availability(*clip) : opts_.clock.stream_now();
        const std::size_t k = clip->index;
        {
            std::lock_guard lock(mu_);
            ++arrived_;
        }
        log_.append(Event{EventType::arrival, at, k, std::nullopt, nlohmann::json::object()});
        const bool waited = queue_.push(Arrival{std::move(*clip), at});
        if (waited && !virtual_clock)
            log_.append(Event{EventType::queue_saturated, opts_.clock.stream_now(), std::nullopt, std::nullopt,
                              {{"clip", k}, {"capacity", queue_.capacity()}}});
    }
    queue_.close();
}

void Pipeline::descriptor_loop() {
    Micros prev_finish{0};
    std::vector<Arrival> batch;
    const std::size_t batch_size = opts_.descriptor_profile.batch_size;
    while (auto item = queue_.pop()) {
        if (batch.empty() && opts_.violation_policy == ViolationPolicy::drop_to_catch_up) {
            const Micros t = now_or(std::max(item->time, prev_finish));
            std::size_t arrived;
            std::size_t completed;
            {
                std::lock_guard lock(mu_);
                completed = completed_;
                arrived = opts_.clock.is_virtual() ? arrivals_through(t) : arrived_;
            }
            const std::size_t depth = arrived > completed ? arrived - completed : 0;
            if (depth > opts_.catch_up_threshold) {
                skip_clip(*item, t, depth);
                continue;
            }
        }
        batch.push_back(std::move(*item));
        if (batch.size() >= batch_size) {
            describe_batch(batch, prev_finish);
            batch.clear();
        }
    }
    if (!batch.empty()) describe_batch(batch, prev_finish);
    {
        std::lock_guard lock(mu_);
        descriptor_done_ = true;
    }
    progress_cv_.notify_all();
}

void Pipeline::skip_clip(const Arrival& a, Micros at, std::size_t depth) {
    MemoryEntry e;
    e.k = a.clip.index;
    e.clip_start = a.clip.start_seconds();
    e.clip_end = a.clip.end_seconds();
    e.backend_id = descriptor_->id();
    e.partial = a.clip.partial;
    e.failure_reason =
        fmt::format("skipped: backlog depth {} exceeds catch-up threshold {}", depth, opts_.catch_up_threshold);
    memory_.append(std::move(e));
    {
        std::lock_guard lock(mu_);
        ++completed_;
        finish_times_.push_back(at);
        last_finish_ = std::max(last_finish_, at);
        clip_stats_.push_back(GenerationStats{});
    }
    log_.append(Event{EventType::skipped, at, a.clip.index, std::nullopt, {{"backlog_depth", depth}}});
    progress_cv_.notify_all();
}

void Pipeline::describe_batch(std::vector<Arrival>& batch, Micros& prev_finish) {
    std::vector<Clip> clips;
    clips.reserve(batch.size());
    for (const Arrival& a : batch) clips.push_back(a.clip);

    const Micros start = std::max(batch.back().time, prev_finish);
    RequestContext ctx;
    ctx.repeat = opts_.repeat;
    std::vector<DescribeResult> results;
    try {
        std::unique_lock<std::mutex> exclusive;
        if (opts_.execution == ExecutionMode::exclusive) exclusive = std::unique_lock(backend_mu_);
        results = descriptor_->describe(opts_.descriptor_profile, clips, descriptor_prompt_, ctx);
    } catch (const std::exception& ex) {
        results.assign(clips.size(), DescribeResult{});
        for (auto& r : results) {
            r.failure = Failure{FailureKind::server, ex.what(), 1};
            r.stats.batch_share = clips.size();
        }
    }
    if (results.size() != clips.size()) {
        results.resize(clips.size());
        for (auto& r : results)
            if (r.text.empty() && !r.failure) r.failure = Failure{FailureKind::server, "missing result", 1};
    }

    double request_time = 0.0;
    for (const auto& r : results) request_time = std::max(request_time, r.stats.wall_time);
    const Micros finish = now_or(start + from_seconds(request_time));

    for (std::size_t i = 0; i < clips.size(); ++i) {
        const Clip& clip = clips[i];
        DescribeResult& r = results[i];
        if (r.stats.batch_share == 0) r.stats.batch_share = clips.size();
        const double t_des = r.stats.per_clip_time();

        MemoryEntry e;
        e.k = clip.index;
        e.clip_start = clip.start_seconds();
        e.clip_end = clip.end_seconds();
        e.gen_time = t_des;
        e.output_tokens = r.tokens;
        e.tokens_per_second = r.stats.tokens_per_second;
        e.backend_id = descriptor_->id();
        e.partial = clip.partial;
        if (r.failure || r.text.empty()) {
            e.failure_reason = r.failure ? r.failure->describe() : std::string("empty description");
        } else {
            e.text = std::move(r.text);
        }
        const bool failed = e.failed();
        memory_.append(std::move(e));

        std::size_t depth;
        {
            std::lock_guard lock(mu_);
            ++completed_;
            finish_times_.push_back(finish);
            last_finish_ = std::max(last_finish_, finish);
            clip_stats_.push_back(r.stats);
            const std::size_t arrived =
                opts_.clock.is_virtual() ? std::max(arrivals_before(finish), clip.index) : arrived_;
            depth = arrived > completed_ ? arrived - completed_ : 0;
        }
        log_.append(Event{EventType::completion, finish, clip.index, std::nullopt,
                          {{"gen_time", t_des}, {"failed", failed}, {"backlog_depth", depth}}});

        if (t_des >= opts_.budget.s) {
            ViolationRecord v;
            v.kind = ViolationKind::descriptor_budget;
            v.clip_index = clip.index;
            v.observed = t_des;
            v.budget = opts_.budget.s;
            v.backlog_depth = depth;
            v.stream_time = finish;
            {
                std::lock_guard lock(mu_);
                violations_.push_back(v);
            }
            log_.append(Event{EventType::violation, finish, clip.index, std::nullopt, to_json(v)});
        }
    }
    prev_finish = finish;
    progress_cv_.notify_all();
}

std::future<AnswerRecord> Pipeline::submit(Query query) {
    validate_candidates(query.candidates);
    if (!reasoner_) throw ConfigError("pipeline has no reasoner backend");

    PendingQuery pq;
    if (opts_.clock.is_virtual()) {
        pq.submit_at_end = !query.submit_time.has_value();
        pq.submit = query.submit_time ? from_seconds(*query.submit_time) : Micros{0};
    } else {
        pq.submit = query.submit_time ? from_seconds(*query.submit_time) : opts_.clock.stream_now();
        pq.view = memory_.snapshot();
    }
    auto future = pq.promise.get_future();
    {
        std::lock_guard lock(mu_);
        if (queries_closed_) throw std::logic_error("pipeline no longer accepts queries");
        if (query.query_id.empty())
            query.query_id = fmt::format("q{}", answers_.size() + pending_.size() + in_flight_queries_ + 1);
        pq.query = std::move(query);
        pending_.push_back(std::move(pq));
    }
    query_cv_.notify_all();
    return future;
}

void Pipeline::qa_loop() {
    Micros lane_free{0};
    const bool virtual_clock = opts_.clock.is_virtual();
    while (true) {
        PendingQuery pq;
        {
            std::unique_lock lock(mu_);
            query_cv_.wait(lock, [this] { return !pending_.empty() || queries_closed_; });
            if (pending_.empty()) break;
            pq = std::move(pending_.front());
            pending_.pop_front();
            ++in_flight_queries_;
        }

        MemoryView view;
        Micros submit = pq.submit;
        if (pq.view) {
            view = *pq.view;
        } else {
            std::size_t n;
            {
                std::unique_lock lock(mu_);
                progress_cv_.wait(lock, [&] {
                    return descriptor_done_ || (!pq.submit_at_end && last_finish_ > pq.submit);
                });
                if (pq.submit_at_end) {
                    n = finish_times_.size();
                    submit = std::max(last_finish_, availability_.empty() ? Micros{0} : availability_.back());
                } else {
                    n = static_cast<std::size_t>(
                        std::upper_bound(finish_times_.begin(), finish_times_.end(), submit) - finish_times_.begin());
                }
            }
            view = memory_.snapshot().prefix(n);
        }

        QueryAnswer qa;
        try {
            std::unique_lock<std::mutex> exclusive;
            if (opts_.execution == ExecutionMode::exclusive) exclusive = std::unique_lock(backend_mu_);
            qa = answer_query(pq.query, *reasoner_, opts_.reasoner_profile, reasoner_template_, view, opts_.budget,
                              opts_.render, context_limit_, opts_.repeat);
        } catch (const std::exception& ex) {
            qa.record.query_id = pq.query.query_id;
            qa.record.memory_length_used = view.size();
            qa.record.failure = ex.what();
        }

        AnswerRecord& r = qa.record;
        const Micros started = virtual_clock ? std::max(submit, lane_free) : submit;
        const Micros answered = now_or(started + from_seconds(r.total_time));
        lane_free = answered;
        r.submit_time = to_seconds(submit);
        r.answered_at = to_seconds(answered);

        if (qa.violation) {
            std::size_t depth;
            {
                std::unique_lock lock(mu_);
                if (virtual_clock) {
                    progress_cv_.wait(lock, [&] { return descriptor_done_ || last_finish_ > answered; });
                    const auto done = static_cast<std::size_t>(
                        std::upper_bound(finish_times_.begin(), finish_times_.end(), answered) -
                        finish_times_.begin());
                    const std::size_t arrived = arrivals_through(answered);
                    depth = arrived > done ? arrived - done : 0;
                } else {
                    depth = arrived_ > completed_ ? arrived_ - completed_ : 0;
                }
            }
            qa.violation->backlog_depth = depth;
            qa.violation->stream_time = answered;
            log_.append(Event{EventType::violation, answered, std::nullopt, r.query_id, to_json(*qa.violation)});
        }
        nlohmann::json detail{{"ttft", r.ttft}, {"total_time", r.total_time}, {"memory_length_used", r.memory_length_used}};
        detail["chosen"] = r.chosen ? nlohmann::json(std::string(1, to_char(*r.chosen))) : nlohmann::json();
        log_.append(Event{EventType::answer, answered, std::nullopt, r.query_id, std::move(detail)});
        {
            std::lock_guard lock(mu_);
            answers_.push_back(r);
            if (qa.violation) violations_.push_back(*qa.violation);
            --in_flight_queries_;
        }
        pq.promise.set_value(std::move(r));
    }
}

bool Pipeline::descriptor_done() const {
    std::lock_guard lock(mu_);
    return descriptor_done_;
}

PipelineStatus Pipeline::status() const {
    std::lock_guard lock(mu_);
    PipelineStatus s;
    s.clips_total = clips_.size();
    s.clips_arrived = arrived_;
    s.clips_completed = completed_;
    s.backlog_depth = arrived_ > completed_ ? arrived_ - completed_ : 0;
    s.memory_length = memory_.size();
    for (const auto& v : violations_) {
        if (v.kind == ViolationKind::descriptor_budget)
            ++s.descriptor_violations;
        else
            ++s.qa_violations;
    }
    s.queries_pending = pending_.size() + in_flight_queries_;
    s.queries_answered = answers_.size();
    s.descriptor_done = descriptor_done_;
    return s;
}

std::vector<ViolationRecord> Pipeline::violations() const {
    std::lock_guard lock(mu_);
    return violations_;
}

std::vector<AnswerRecord> Pipeline::answers() const {
    std::lock_guard lock(mu_);
    return answers_;
}

std::vector<GenerationStats> Pipeline::clip_stats() const {
    std::lock_guard lock(mu_);
    return clip_stats_;
}

DescriptorRun run_descriptor_worker(std::vector<Clip> clips, std::shared_ptr<Backend> backend,
                                    const std::string& prompt, TextualMemory& memory, EventLog& log,
                                    PipelineOptions options) {
    Pipeline pipeline(std::move(options), std::move(backend), nullptr, prompt, ReasonerPromptTemplate{}, memory, log);
    pipeline.start(std::move(clips));
    pipeline.finish();
    return DescriptorRun{pipeline.violations(), pipeline.clip_stats()};
}

}  // namespace oem
