// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "oemstream/backlog.hpp"
#include "oemstream/bench.hpp"
#include "oemstream/config.hpp"
#include "oemstream/pipeline.hpp"
#include "oemstream/report.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace oem;
namespace ts = testing_support;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

struct Criterion {
    std::string name;
    double limit_seconds;
    std::function<Outcome()> check;
};

Micros at(double s) { return from_seconds(s); }

// Descriptor-only replay on the simulated clock.
struct Replay {
    TextualMemory memory{"acceptance"};
    EventLog log;
    DescriptorRun run;

    Replay(std::shared_ptr<Backend> backend, std::size_t n_clips, std::size_t batch_size = 1) {
        PipelineOptions opts;
        opts.clock = ReplayClock::simulated();
        opts.descriptor_profile.batch_size = batch_size;
        opts.queue_capacity = 8;
        run = run_descriptor_worker(ts::uniform_clips(n_clips), std::move(backend), ts::default_descriptor_prompt(),
                                    memory, log, opts);
    }
};

Outcome budget_semantics() {
    Outcome o;
    const std::pair<double, std::size_t> cases[] = {{14.80, 0}, {15.00, 40}, {16.80, 40}};
    std::vector<std::string> seen;
    for (const auto& [latency, expected] : cases) {
        Replay r(ts::constant_mock(latency), 40);
        const auto n = r.run.violations.size();
        seen.push_back(fmt::format("{:.2f}s->{}", latency, n));
        o.require(n == expected, fmt::format("latency {:.2f} s gave {} violations, expected {}", latency, n, expected));
        for (const auto& v : r.run.violations)
            o.require(v.observed >= v.budget && v.kind == ViolationKind::descriptor_budget, "malformed violation");
        o.require(r.memory.size() == 40, "memory incomplete");
    }
    if (o.pass) o.detail = fmt::format("violations over 40 clips: {}", fmt::join(seen, ", "));
    return o;
}

Outcome backlog_oracle() {
    Outcome o;
    std::mt19937_64 rng(20240601);
    std::size_t points = 0;
    for (int seq = 0; seq < 50; ++seq) {
        std::vector<double> latency(100);
        // Half the sequences use whole seconds so completions land exactly on arrivals.
        std::uniform_int_distribution<int> whole(5, 30);
        std::uniform_int_distribution<int> millis(1'000, 35'000);
        for (auto& l : latency) l = seq % 2 == 0 ? double(whole(rng)) : double(millis(rng)) / 1000.0;

        MockScript s;
        s.describe_latency = Distribution::sequence(latency);
        Replay r(std::make_shared<MockBackend>(s), 100);

        std::vector<std::int64_t> arr, lat;
        for (std::size_t k = 1; k <= 100; ++k) {
            arr.push_back(at(15.0 * double(k)).count());
            lat.push_back(at(latency[k - 1]).count());
        }
        const auto expected = oracle::backlog_simulation(arr, lat);
        const auto expected_depths = oracle::depth_at_completion(arr, lat);
        const auto trace = backlog_trace(r.log.canonical());
        o.require(trace.size() == expected.size(), fmt::format("sequence {}: trace length differs", seq));
        for (std::size_t i = 0; o.pass && i < trace.size(); ++i)
            o.require(trace[i].time.count() == expected[i].time_us && long(trace[i].depth) == expected[i].depth,
                      fmt::format("sequence {}: trace differs at event {}", seq, i));
        std::size_t k = 0;
        for (const Event& e : r.log.canonical()) {
            if (e.type != EventType::completion) continue;
            o.require(long(e.detail.at("backlog_depth").get<std::size_t>()) == expected_depths[k],
                      fmt::format("sequence {}: completion depth of clip {} differs", seq, k + 1));
            ++k;
        }
        points += trace.size();
    }
    if (o.pass) o.detail = fmt::format("50 sequences x 100 clips, {} trace points identical", points);
    return o;
}

Outcome snapshot_isolation() {
    Outcome o;
    constexpr std::size_t kAppends = 5000;
    constexpr std::size_t kSnapshots = 5000;
    TextualMemory memory("stress");
    std::atomic<std::size_t> exceptions{0};
    std::atomic<std::size_t> taken{0};
    std::mutex collected_mu;
    std::vector<std::vector<MemoryEntry>> collected;

    std::thread writer([&] {
        std::mt19937 rng(1);
        std::uniform_int_distribution<int> pause(0, 3);
        try {
            for (std::size_t k = 1; k <= kAppends; ++k) {
                memory.append(ts::entry(k, fmt::format("entry {} {}", k, rng())));
                if (pause(rng) == 0) std::this_thread::yield();
            }
        } catch (...) {
            ++exceptions;
        }
    });
    std::vector<std::thread> readers;
    for (int t = 0; t < 4; ++t)
        readers.emplace_back([&, t] {
            std::mt19937 rng(100 + t);
            std::uniform_int_distribution<int> pause(0, 50);
            try {
                while (taken.fetch_add(1) < kSnapshots) {
                    const MemoryView v = memory.snapshot();
                    auto copy = v.to_vector();
                    {
                        std::lock_guard lock(collected_mu);
                        collected.push_back(std::move(copy));
                    }
                    std::this_thread::sleep_for(std::chrono::microseconds(pause(rng)));
                }
            } catch (...) {
                ++exceptions;
            }
        });
    writer.join();
    for (auto& r : readers) r.join();

    const auto final_log = memory.snapshot().to_vector();
    o.require(exceptions == 0, fmt::format("{} exceptions", exceptions.load()));
    o.require(final_log.size() == kAppends, "final log incomplete");
    std::set<std::size_t> lengths;
    for (const auto& snap : collected) {
        lengths.insert(snap.size());
        o.require(snap.size() <= final_log.size() && std::equal(snap.begin(), snap.end(), final_log.begin()),
                  "a snapshot is not a prefix of the final log");
    }
    if (o.pass)
        o.detail = fmt::format("{} appends + {} snapshots ({} distinct lengths), all prefixes, 0 exceptions", kAppends,
                               collected.size(), lengths.size());
    return o;
}

BenchmarkConfig bench_config(MockScript reasoner) {
    BenchmarkConfig c;
    c.descriptor_prompt = ts::default_descriptor_prompt();
    c.reasoner_template = ts::default_reasoner_template();
    c.factory = [reasoner](BackendRole, std::uint64_t seed) {
        MockScript s = reasoner;
        s.seed = seed;
        return std::make_shared<MockBackend>(s);
    };
    return c;
}

Outcome accuracy_bookkeeping() {
    Outcome o;
    StreamCatalog catalog;
    catalog["s"].entries = std::vector<MemoryEntry>{ts::entry(1, "I cooked pasta."), ts::entry(2, "I washed the pan.")};
    std::vector<std::uint64_t> seeds(10);
    std::iota(seeds.begin(), seeds.end(), 1);

    // 25 items; the scripted answer is right for the first 13.
    MockScript keyed;
    keyed.answer_policy.kind = AnswerPolicy::Kind::answer_key;
    std::vector<BenchmarkItem> items;
    for (int i = 0; i < 25; ++i) {
        const Option correct = kOptions[i % 4];
        const Option given = i < 13 ? correct : kOptions[(i + 1) % 4];
        const std::string question = fmt::format("Question {}?", i);
        keyed.answer_policy.key[question] = given;
        items.push_back({fmt::format("item-{}", i), "s", question, ts::abcd("a", "b", "c", "d"), correct, std::nullopt});
    }
    const auto fixed = run_benchmark(items, catalog, bench_config(keyed), seeds);
    for (const auto& s : fixed.per_seed)
        o.require(s.correct == 13 && s.total == 25 && s.accuracy == 52.0,
                  fmt::format("seed {}: {}/{} correct", s.seed, s.correct, s.total));
    o.require(fixed.accuracy.mean == 52.0 && fixed.accuracy.stddev == 0.0,
              fmt::format("fixture gave {:.2f}±{:.2f}", fixed.accuracy.mean, fixed.accuracy.stddev));

    MockScript random;
    random.answer_policy.kind = AnswerPolicy::Kind::uniform_random;
    std::vector<BenchmarkItem> many;
    std::mt19937 rng(5);
    for (int i = 0; i < 500; ++i)
        many.push_back({fmt::format("r-{}", i), "s", fmt::format("Random {}?", i), ts::abcd("a", "b", "c", "d"),
                        kOptions[rng() % 4], std::nullopt});
    const auto chance = run_benchmark(many, catalog, bench_config(random), seeds);
    double lo = 100.0, hi = 0.0;
    for (const auto& s : chance.per_seed) {
        lo = std::min(lo, s.accuracy);
        hi = std::max(hi, s.accuracy);
        o.require(std::abs(s.accuracy - 25.0) <= 6.0, fmt::format("seed {}: random accuracy {:.2f}%", s.seed, s.accuracy));
    }
    if (o.pass)
        o.detail = fmt::format("25-item fixture {:.2f}±{:.2f}% over 10 seeds; random policy per-seed range [{:.2f}, {:.2f}]%",
                               fixed.accuracy.mean, fixed.accuracy.stddev, lo, hi);
    return o;
}

Outcome ttft_protocol() {
    Outcome o;
    const std::pair<double, double> rows[] = {{0.20, 0.14}, {0.41, 0.27}, {0.49, 0.31}, {0.88, 0.57}};
    TextualMemory memory("ttft");
    for (std::size_t k = 1; k <= 20; ++k) memory.append(ts::entry(k, "I walked around the kitchen."));
    const MemoryView fixtures[] = {memory.snapshot(), memory.snapshot().prefix(5)};
    std::vector<std::string> summary;
    for (const auto& [mean, sd] : rows) {
        MockScript s;
        s.seed = 2024;
        s.ttft = Distribution::gaussian(mean, sd);
        MockBackend reasoner(s);
        TtftOptions opts;
        opts.n_queries = 1000;
        const auto rep = measure_ttft(reasoner, {}, ts::default_reasoner_template(), fixtures, opts);
        for (const auto& r : rep.samples) {
            o.require(r.final_text.size() == 1 && r.final_text == r.raw_first_token, "answer is not a single token");
            o.require(r.ttft <= r.total_time, "ttft exceeds T_ans");
        }
        const double tol = 3.0 * sd / std::sqrt(1000.0);
        const double clamped = oracle::clamped_gaussian_mean(mean, sd, 2'000'000, 99);
        o.require(std::abs(rep.ttft.mean - mean) <= tol,
                  fmt::format("scripted {:.2f}: measured {:.4f} outside ±{:.4f}", mean, rep.ttft.mean, tol));
        o.require(std::abs(rep.ttft.mean - clamped) <= tol, "measured mean far from clamped-gaussian oracle");
        o.require(rep.failures == 0, "failed samples");
        summary.push_back(fmt::format("{:.2f}->{:.3f}", mean, rep.ttft.mean));
    }
    if (o.pass) o.detail = fmt::format("n=1000 each, scripted->measured: {}; single-token answers", fmt::join(summary, ", "));
    return o;
}

struct ExpectedRow {
    std::string quant;
    double fps;
    std::string res;
    std::size_t bs;
};

MetricsTable sweep_fixture(const std::string& grid_name) {
    const RunConfig cfg = load_run_config(ts::fixture("sweep_run.json"));
    SweepConfig sc;
    sc.base = cfg.pipeline_options();
    sc.descriptor_prompt = cfg.descriptor_prompt();
    sc.repeats = 10;
    sc.factory = [&cfg](const SweepAxes& p) { return make_backend(cfg.descriptor, std::nullopt, p.backend_override); };
    const auto grid = load_grid(ts::fixture(grid_name));
    return run_sweep(grid, cfg.source.frames(), sc);
}

Outcome sweep_reproduction() {
    Outcome o;
    // Rows whose time per clip reaches the budget in the shipped grid.
    const std::vector<ExpectedRow> red = {
        {"full", 2, "768x1024", 2}, {"4bit", 1, "768x1024", 1}, {"4bit", 1, "768x1024", 2},
        {"4bit", 2, "384x384", 1},  {"4bit", 2, "384x384", 2},  {"4bit", 2, "448x448", 1},
        {"4bit", 2, "448x448", 2},  {"4bit", 2, "768x1024", 1}, {"4bit", 2, "768x1024", 2},
    };
    const auto is_red = [&](const SweepAxes& a) {
        for (const auto& r : red)
            if (r.quant == a.quantization_label && r.fps == a.fps && r.res == to_string(a.resolution) && r.bs == a.batch_size)
                return true;
        return false;
    };

    auto t1 = sweep_fixture("sweep_2b_grid.json");
    o.require(t1.rows.size() == 24, "2B grid should have 24 rows");
    std::size_t full_ok = 0, full_bad = 0, q_ok = 0, q_bad = 0;
    for (const auto& r : t1.rows) {
        o.require(!r.failed, "failed row " + r.axes.label());
        o.require(r.compliant != is_red(r.axes), "partition differs at " + r.axes.label());
        auto& counter = r.axes.quantization_label == "full" ? (r.compliant ? full_ok : full_bad) : (r.compliant ? q_ok : q_bad);
        ++counter;
    }
    t1.selected = select_configuration(t1, SelectionPolicy::fidelity());
    o.require(t1.selected.has_value(), "no configuration selected for the 2B sweep");
    if (t1.selected) {
        const auto& a = t1.rows[*t1.selected].axes;
        o.require(a.quantization_label == "full" && a.fps == 2 && to_string(a.resolution) == "768x1024" && a.batch_size == 1,
                  "2B sweep selection is " + a.label());
        o.require(std::abs(t1.rows[*t1.selected].time_per_clip.mean - 14.80) < 0.005, "selected mean is not 14.80");
    }

    auto t2 = sweep_fixture("sweep_models_grid.json");
    o.require(t2.rows.size() == 9, "model grid should have 9 rows");
    for (const auto& r : t2.rows) o.require(r.compliant, "model sweep row violates: " + r.axes.label());
    t2.selected = select_configuration(t2, SelectionPolicy::largest_model());
    o.require(t2.selected.has_value(), "no configuration selected for the model sweep");
    if (t2.selected) {
        const auto& a = t2.rows[*t2.selected].axes;
        o.require(model_size(a.model_name) == 8.0 && a.batch_size == 2, "model sweep selection is " + a.label());
    }
    if (o.pass)
        o.detail = fmt::format("2B sweep: full {} ok/{} over, 4-bit {} ok/{} over, selected {}; model sweep selected {}",
                               full_ok, full_bad, q_ok, q_bad, t1.rows[*t1.selected].axes.label(),
                               t2.rows[*t2.selected].axes.label());
    return o;
}

struct RunArtifacts {
    std::string memory;
    std::string answers;
    std::string events;
    std::string status;
    std::string sweep;
    std::string accuracy;
};

RunArtifacts full_run() {
    const RunConfig cfg = load_run_config(ts::fixture("sample_run.json"));
    RunArtifacts out;
    {
        TextualMemory memory(cfg.stream_id);
        EventLog log;
        Pipeline p(cfg.pipeline_options(), make_backend(cfg.descriptor), make_backend(cfg.reasoner),
                   cfg.descriptor_prompt(), cfg.reasoner_prompt(), memory, log);
        p.start(segment_stream(cfg.source.frames(), cfg.budget.s, cfg.descriptor.profile.fps));
        std::vector<std::future<AnswerRecord>> fs;
        for (const auto& q : cfg.queries) fs.push_back(p.submit(q));
        for (int i = 0; i < 6; ++i)
            fs.push_back(p.submit(Query{fmt::format("extra-{}", i), "Where did I put the keys?",
                                        ts::abcd("on the table near the door", "in the fridge", "on the sofa", "in the sink"),
                                        10.0 + 17.0 * i}));
        p.finish();
        for (auto& f : fs) out.answers += nlohmann::json(f.get()).dump() + "\n";
        out.memory = to_jsonl(memory.snapshot());
        std::ostringstream ev;
        for (const auto& e : log.canonical()) ev << event_to_json(e).dump() << "\n";
        out.events = ev.str();
        out.status = to_json(p.status(), p.options()).dump();
    }
    auto table = sweep_fixture("sweep_models_grid.json");
    table.selected = select_configuration(table, SelectionPolicy::largest_model());
    out.sweep = emit_table(table, TableFormat::csv) + emit_table(table, TableFormat::markdown);

    StreamCatalog catalog;
    catalog[cfg.stream_id].clips = segment_stream(cfg.source.frames(), cfg.budget.s, cfg.descriptor.profile.fps);
    std::vector<BenchmarkItem> items;
    for (int i = 0; i < 8; ++i)
        items.push_back({fmt::format("d-{}", i), cfg.stream_id, "Where did I put the keys?",
                         ts::abcd("on the table near the door", "in the fridge", "on the sofa", "in the sink"), Option::A,
                         15.0 * (i + 1)});
    const std::uint64_t seeds[] = {1, 2, 3};
    BenchmarkConfig bc{cfg.pipeline_options(), cfg.descriptor_prompt(), cfg.reasoner_prompt(), make_factory(cfg)};
    const auto report = run_benchmark(items, build_catalog(cfg), bc, seeds);
    const auto row = accuracy_row("sample", report);
    out.accuracy = emit_accuracy_table(std::span(&row, 1), TableFormat::csv) + answers_to_jsonl(report);
    return out;
}

Outcome determinism() {
    Outcome o;
    const auto a = full_run();
    const auto b = full_run();
    o.require(!a.memory.empty() && !a.answers.empty(), "empty artifacts");
    o.require(a.memory == b.memory, "memory JSONL differs");
    o.require(a.answers == b.answers, "answer JSONL differs");
    o.require(a.events == b.events, "event log differs");
    o.require(a.status == b.status, "status differs");
    o.require(a.sweep == b.sweep, "sweep report differs");
    o.require(a.accuracy == b.accuracy, "accuracy report differs");
    if (o.pass)
        o.detail = fmt::format("memory {} B, answers {} B, events {} B, reports {} B identical across two runs",
                               a.memory.size(), a.answers.size(), a.events.size(), a.sweep.size() + a.accuracy.size());
    return o;
}

Outcome persistence() {
    Outcome o;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::vector<std::string> pieces = {"abc", " ", "xyz", "\"quoted\"", "\\", "\n", "\t", "é", "ü", "日本", "{}", "[]", ":", ","};
    TextualMemory memory("persist");
    std::size_t failures = 0;
    for (std::size_t k = 1; k <= 1000; ++k) {
        MemoryEntry e;
        e.k = k;
        e.clip_start = 15.0 * double(k - 1);
        e.clip_end = k == 1000 ? e.clip_start + 7.123456789 : 15.0 * double(k);
        e.partial = k == 1000;
        e.gen_time = unit(rng) * 40.0;
        e.tokens_per_second = unit(rng) * 60.0;
        e.output_tokens = rng() % 600;
        e.backend_id = k % 2 ? "mock-a" : "http-b";
        if (unit(rng) < 0.15) {
            e.failure_reason = fmt::format("timeout: no completion within {} s", rng() % 90);
            ++failures;
        } else {
            const std::size_t len = rng() % 120;
            for (std::size_t i = 0; i < len; ++i) e.text += pieces[rng() % pieces.size()];
            if (e.text.empty()) e.text = "x";
        }
        memory.append(std::move(e));
    }
    const auto dir = ts::scratch("acceptance_persistence");
    persist(memory.snapshot(), dir / "memory.jsonl");
    const auto loaded = load_memory(dir / "memory.jsonl");
    o.require(loaded.size() == 1000, "wrong entry count after load");
    o.require(loaded == memory.snapshot().to_vector(), "entries differ after round trip");
    TextualMemory reloaded("persist", loaded);
    o.require(to_jsonl(reloaded.snapshot()) == to_jsonl(memory.snapshot()), "re-serialized bytes differ");
    if (o.pass) o.detail = fmt::format("1000 entries ({} failures) round-trip exactly", failures);
    return o;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"budget-semantics", 10, budget_semantics},
        {"backlog-oracle", 30, backlog_oracle},
        {"snapshot-isolation", 60, snapshot_isolation},
        {"accuracy-bookkeeping", 60, accuracy_bookkeeping},
        {"ttft-protocol", 60, ttft_protocol},
        {"sweep-reproduction", 10, sweep_reproduction},
        {"determinism", 60, determinism},
        {"persistence", 10, persistence},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& ex) {
            o.pass = false;
            o.detail = std::string("exception: ") + ex.what();
        }
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.pass && elapsed >= c.limit_seconds) {
            o.pass = false;
            o.detail = fmt::format("took {:.1f} s, limit {} s", elapsed, c.limit_seconds);
        }
        if (!o.pass) ++failed;
        fmt::print("{} {:<21} {:6.2f}s  {}\n", o.pass ? "PASS" : "FAIL", c.name, elapsed, o.detail);
        std::fflush(stdout);
    }
    fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
