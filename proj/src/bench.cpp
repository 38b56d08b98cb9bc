#include "oemstream/bench.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "oemstream/error.hpp"

namespace oem {

void BenchmarkItem::validate() const {
    if (item_id.empty()) throw InputError("benchmark item without item_id");
    validate_candidates(candidates);
    std::set<std::string> seen;
    for (const auto& c : candidates)
        if (!seen.insert(c.text).second) throw InputError("item " + item_id + " has duplicate candidates");
    if (query_time && *query_time < 0.0) throw InputError("item " + item_id + " has a negative query_time");
}

void to_json(nlohmann::json& j, const BenchmarkItem& item) {
    j = nlohmann::json{{"item_id", item.item_id},
                       {"stream_id", item.stream_id},
                       {"question", item.question},
                       {"candidates", candidates_to_json(item.candidates)},
                       {"correct", std::string(1, to_char(item.correct))}};
    if (item.query_time) j["query_time"] = *item.query_time;
}

void from_json(const nlohmann::json& j, BenchmarkItem& item) {
    item.item_id = j.at("item_id").get<std::string>();
    item.stream_id = j.at("stream_id").get<std::string>();
    item.question = j.at("question").get<std::string>();
    item.candidates = candidates_from_json(j.at("candidates"));
    const auto letter = j.at("correct").get<std::string>();
    auto opt = letter.size() == 1 ? option_from_char(letter[0]) : std::nullopt;
    if (!opt) throw InputError("correct answer must be one of A-D");
    item.correct = *opt;
    item.query_time.reset();
    if (j.contains("query_time") && !j.at("query_time").is_null()) item.query_time = j.at("query_time").get<double>();
}

std::vector<BenchmarkItem> load_items(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError(0, "cannot open " + path.string());
    std::vector<BenchmarkItem> items;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto item = nlohmann::json::parse(line).get<BenchmarkItem>();
            item.validate();
            items.push_back(std::move(item));
        } catch (const std::exception& ex) {
            throw LoadError(lineno, ex.what());
        }
    }
    return items;
}

namespace {

std::optional<std::size_t> resolve_context_limit(Backend& reasoner, const BackendProfile& profile) {
    if (profile.context_limit_tokens) return profile.context_limit_tokens;
    try {
        return reasoner.probe(profile).context_limit;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

Query to_query(const BenchmarkItem& item) {
    return Query{item.item_id, item.question, item.candidates, item.query_time};
}

std::size_t entries_through(const MemoryView& view, std::optional<double> t) {
    if (!t) return view.size();
    std::size_t n = 0;
    while (n < view.size() && view[n].clip_end <= *t) ++n;
    return n;
}

}  // namespace

BenchmarkReport run_benchmark(std::span<const BenchmarkItem> items, const StreamCatalog& streams,
                              const BenchmarkConfig& config, std::span<const std::uint64_t> seeds) {
    if (seeds.empty()) throw InputError("run_benchmark needs at least one seed");
    if (!config.factory) throw ConfigError("run_benchmark needs a backend factory");
    for (const auto& item : items) item.validate();

    BenchmarkReport report;
    std::vector<std::string> order;
    std::map<std::string, std::vector<const BenchmarkItem*>> by_stream;
    for (const auto& item : items) {
        if (!streams.contains(item.stream_id)) {
            report.audit.push_back({item.item_id, item.stream_id, "stream not found; item skipped"});
            continue;
        }
        auto& bucket = by_stream[item.stream_id];
        if (bucket.empty()) order.push_back(item.stream_id);
        bucket.push_back(&item);
    }

    RunningStats acc;
    for (std::uint64_t seed : seeds) {
        SeedResult result;
        result.seed = seed;
        std::shared_ptr<Backend> reasoner = config.factory(BackendRole::reasoner, seed);
        const auto context_limit = resolve_context_limit(*reasoner, config.pipeline.reasoner_profile);
        std::map<std::string, AnswerRecord> records;

        for (const auto& stream_id : order) {
            const StreamSource& source = streams.at(stream_id);
            const auto& stream_items = by_stream.at(stream_id);
            if (source.entries) {
                TextualMemory memory(stream_id, *source.entries);
                const MemoryView view = memory.snapshot();
                for (const BenchmarkItem* item : stream_items) {
                    auto qa = answer_query(to_query(*item), *reasoner, config.pipeline.reasoner_profile,
                                           config.reasoner_template, view.prefix(entries_through(view, item->query_time)),
                                           config.pipeline.budget, config.pipeline.render, context_limit,
                                           config.pipeline.repeat);
                    records[item->item_id] = std::move(qa.record);
                }
                continue;
            }
            TextualMemory memory(stream_id);
            EventLog log;
            Pipeline pipeline(config.pipeline, config.factory(BackendRole::descriptor, seed), reasoner,
                              config.descriptor_prompt, config.reasoner_template, memory, log);
            pipeline.start(source.clips);
            std::vector<std::future<AnswerRecord>> pending;
            for (const BenchmarkItem* item : stream_items) pending.push_back(pipeline.submit(to_query(*item)));
            pipeline.finish();
            for (std::size_t i = 0; i < pending.size(); ++i) records[stream_items[i]->item_id] = pending[i].get();
        }

        for (const auto& item : items) {
            auto it = records.find(item.item_id);
            if (it == records.end()) continue;
            ScoredAnswer scored{item.item_id, item.correct, false, it->second};
            scored.is_correct = scored.record.chosen == item.correct;
            if (scored.record.unparseable()) ++result.unparseable;
            if (scored.is_correct) ++result.correct;
            ++result.total;
            result.answers.push_back(std::move(scored));
        }
        result.accuracy =
            result.total > 0 ? 100.0 * static_cast<double>(result.correct) / static_cast<double>(result.total) : 0.0;
        acc.add(result.accuracy);
        report.per_seed.push_back(std::move(result));
    }
    report.accuracy = acc.summary();
    return report;
}

nlohmann::json to_json(const ScoredAnswer& a) {
    nlohmann::json j = a.record;
    j["item_id"] = a.item_id;
    j["correct"] = std::string(1, to_char(a.correct));
    j["is_correct"] = a.is_correct;
    return j;
}

std::string answers_to_jsonl(const BenchmarkReport& report) {
    std::string out;
    for (const auto& seed : report.per_seed) {
        for (const auto& a : seed.answers) {
            auto j = to_json(a);
            j["seed"] = seed.seed;
            out += j.dump();
            out += '\n';
        }
    }
    return out;
}

TtftReport measure_ttft(Backend& backend, const BackendProfile& profile, const ReasonerPromptTemplate& tpl,
                        std::span<const MemoryView> fixtures, const TtftOptions& options, const BudgetConfig& budget) {
    if (options.n_queries == 0) throw InputError("measure_ttft needs at least one query");
    validate_candidates(options.candidates);
    const auto context_limit = resolve_context_limit(backend, profile);

    TtftReport report;
    RunningStats ttft;
    RunningStats total;
    const MemoryView empty;
    for (std::size_t i = 0; i < options.n_queries; ++i) {
        const MemoryView& view = fixtures.empty() ? empty : fixtures[i % fixtures.size()];
        Query q{fmt::format("ttft-{}", i), options.question, options.candidates, std::nullopt};
        auto qa = answer_query(q, backend, profile, tpl, view, budget, {}, context_limit, options.repeat);
        if (qa.record.failure || qa.record.raw_first_token.empty()) {
            ++report.failures;
        } else {
            ttft.add(qa.record.ttft);
            total.add(qa.record.total_time);
        }
        report.samples.push_back(std::move(qa.record));
    }
    if (ttft.count() == 0) throw CampaignError(fmt::format("all {} TTFT samples failed", options.n_queries));
    report.ttft = ttft.summary();
    report.total_time = total.summary();
    return report;
}

std::string SweepAxes::label() const {
    return fmt::format("{} {} fps={} res={} bs={}", model_name.empty() ? "-" : model_name, quantization_label, fps,
                       to_string(resolution), batch_size);
}

void to_json(nlohmann::json& j, const SweepAxes& a) {
    j = nlohmann::json{{"model", a.model_name},
                       {"fps", a.fps},
                       {"resolution", to_string(a.resolution)},
                       {"batch_size", a.batch_size},
                       {"quantization", a.quantization_label}};
    if (!a.backend_override.empty()) j["mock"] = a.backend_override;
}

void from_json(const nlohmann::json& j, SweepAxes& a) {
    a.model_name = j.value("model", std::string{});
    a.fps = j.value("fps", 2.0);
    if (j.contains("resolution")) a.resolution = parse_resolution(j.at("resolution").get<std::string>());
    a.batch_size = j.value("batch_size", std::size_t{1});
    a.quantization_label = j.value("quantization", std::string("full"));
    a.backend_override = j.value("mock", nlohmann::json::object());
    if (!(a.fps > 0.0)) throw ConfigError("grid point fps must be positive");
    if (a.batch_size == 0) throw ConfigError("grid point batch_size must be at least 1");
}

std::vector<SweepAxes> load_grid(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open grid file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError("grid file " + path.string() + ": " + ex.what());
    }
    const auto& points = j.is_object() ? j.at("points") : j;
    return points.get<std::vector<SweepAxes>>();
}

bool axes_less(const SweepAxes& a, const SweepAxes& b) {
    return std::tie(a.quantization_label, a.model_name, a.fps, a.resolution.height, a.resolution.width, a.batch_size) <
           std::tie(b.quantization_label, b.model_name, b.fps, b.resolution.height, b.resolution.width, b.batch_size);
}

MetricsTable run_sweep(std::span<const SweepAxes> grid, std::span<const Frame> frames, const SweepConfig& config) {
    if (config.repeats == 0) throw InputError("run_sweep needs at least one repeat");
    if (!config.factory) throw ConfigError("run_sweep needs a backend factory");
    config.base.budget.validate();

    MetricsTable table;
    table.budget_s = config.base.budget.s;
    for (const SweepAxes& point : grid) {
        SweepRow row;
        row.axes = point;
        RunningStats time;
        RunningStats tps;
        RunningStats peak;
        std::size_t observed = 0;
        std::size_t violating = 0;
        std::string last_failure;
        try {
            PipelineOptions opts = config.base;
            opts.clock = ReplayClock::simulated();
            opts.violation_policy = ViolationPolicy::record;
            opts.descriptor_profile.model_name = point.model_name;
            opts.descriptor_profile.fps = point.fps;
            opts.descriptor_profile.resolution = point.resolution;
            opts.descriptor_profile.batch_size = point.batch_size;
            opts.descriptor_profile.quantization_label = point.quantization_label;
            opts.descriptor_profile.validate();

            const auto clips = segment_stream(frames, opts.budget.s, point.fps);
            if (clips.empty()) throw InputError("sweep source has no frames");
            auto backend = config.factory(point);
            for (std::size_t r = 0; r < config.repeats; ++r) {
                opts.repeat = r;
                TextualMemory memory;
                EventLog log;
                const auto run = run_descriptor_worker(clips, backend, config.descriptor_prompt, memory, log, opts);
                const MemoryView view = memory.snapshot();
                for (std::size_t i = 0; i < view.size(); ++i) {
                    const MemoryEntry& e = view[i];
                    ++observed;
                    if (e.gen_time >= opts.budget.s) ++violating;
                    if (e.failed()) {
                        last_failure = *e.failure_reason;
                        continue;
                    }
                    time.add(e.gen_time);
                    tps.add(e.tokens_per_second);
                    if (i < run.clip_stats.size() && run.clip_stats[i].peak_memory_bytes)
                        peak.add(static_cast<double>(*run.clip_stats[i].peak_memory_bytes) / 1e9);
                }
            }
        } catch (const std::exception& ex) {
            last_failure = ex.what();
            time = RunningStats{};
        }
        if (time.count() == 0) {
            row.failed = true;
            row.failure = last_failure.empty() ? "no observations" : last_failure;
        } else {
            row.time_per_clip = time.summary();
            row.tokens_per_second = tps.summary();
            if (peak.count() > 0) row.peak_memory_gb = peak.summary();
            row.violating_clip_fraction = static_cast<double>(violating) / static_cast<double>(observed);
            row.compliant = row.time_per_clip.mean < config.base.budget.s;
        }
        table.rows.push_back(std::move(row));
    }
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const SweepRow& a, const SweepRow& b) { return axes_less(a.axes, b.axes); });
    return table;
}

SelectionPolicy SelectionPolicy::fidelity() {
    return {{SelectionCriterion::fps_desc, SelectionCriterion::resolution_desc, SelectionCriterion::time_asc}};
}

SelectionPolicy SelectionPolicy::largest_model() {
    return {{SelectionCriterion::model_size_desc, SelectionCriterion::time_asc}};
}

SelectionPolicy SelectionPolicy::from_string(const std::string& name) {
    if (name == "fidelity") return fidelity();
    if (name == "largest-model" || name == "largest_model") return largest_model();
    throw ConfigError("unknown selection policy '" + name + "'");
}

double model_size(std::string_view model_name) {
    static const std::regex pattern(R"((\d+(?:\.\d+)?)\s*[bB](?![A-Za-z]))");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(model_name.begin(), model_name.end(), m, pattern)) return 0.0;
    return std::stod(m[1].str());
}

std::optional<std::size_t> select_configuration(const MetricsTable& table, const SelectionPolicy& policy) {
    if (table.rows.empty()) throw InputError("select_configuration needs a non-empty table");
    // Negative when a ranks before b.
    const auto compare = [&](const SweepRow& a, const SweepRow& b) {
        for (SelectionCriterion c : policy.order) {
            double lhs = 0.0;
            double rhs = 0.0;
            switch (c) {
                case SelectionCriterion::fps_desc: lhs = -a.axes.fps; rhs = -b.axes.fps; break;
                case SelectionCriterion::resolution_desc:
                    lhs = -static_cast<double>(a.axes.resolution.area());
                    rhs = -static_cast<double>(b.axes.resolution.area());
                    break;
                case SelectionCriterion::model_size_desc:
                    lhs = -model_size(a.axes.model_name);
                    rhs = -model_size(b.axes.model_name);
                    break;
                case SelectionCriterion::time_asc: lhs = a.time_per_clip.mean; rhs = b.time_per_clip.mean; break;
            }
            if (lhs < rhs) return -1;
            if (lhs > rhs) return 1;
        }
        return 0;
    };
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const SweepRow& row = table.rows[i];
        if (row.failed || !row.compliant) continue;
        if (!best || compare(row, table.rows[*best]) < 0) best = i;
    }
    return best;
}

}  // namespace oem
