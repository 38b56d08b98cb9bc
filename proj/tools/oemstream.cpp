#include <csignal>
#include <cstdio>
#include <iostream>
#include <numeric>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "oemstream/bench.hpp"
#include "oemstream/config.hpp"
#include "oemstream/error.hpp"
#include "oemstream/event_log.hpp"
#include "oemstream/memory.hpp"
#include "oemstream/pipeline.hpp"
#include "oemstream/report.hpp"
#include "oemstream/server.hpp"

namespace {

using namespace oem;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

std::string records_jsonl(const std::vector<AnswerRecord>& records) {
    std::string out;
    for (const auto& r : records) out += nlohmann::json(r).dump() + "\n";
    return out;
}

std::string violations_jsonl(const std::vector<ViolationRecord>& records) {
    std::string out;
    for (const auto& v : records) out += to_json(v).dump() + "\n";
    return out;
}

int cmd_run(const std::string& config_path, const std::string& out_override, std::optional<std::uint64_t> seed) {
    const RunConfig cfg = load_run_config(config_path);
    const auto out_dir = out_override.empty() ? cfg.output_dir : std::filesystem::path(out_override);
    const auto frames = cfg.source.frames();
    auto clips = segment_stream(frames, cfg.budget.s, cfg.descriptor.profile.fps);

    TextualMemory memory(cfg.stream_id);
    EventLog log;
    Pipeline pipeline(cfg.pipeline_options(), make_backend(cfg.descriptor, seed), make_backend(cfg.reasoner, seed),
                      cfg.descriptor_prompt(), cfg.reasoner_prompt(), memory, log);
    write_text(out_dir / "clips.json", clips_to_json(clips).dump(2) + "\n");
    pipeline.start(std::move(clips));
    std::vector<std::future<AnswerRecord>> answers;
    for (const auto& q : cfg.queries) answers.push_back(pipeline.submit(q));
    pipeline.finish();

    std::vector<AnswerRecord> records;
    for (auto& f : answers) records.push_back(f.get());
    persist(memory.snapshot(), out_dir / "memory.jsonl");
    write_text(out_dir / "answers.jsonl", records_jsonl(records));
    write_text(out_dir / "violations.jsonl", violations_jsonl(pipeline.violations()));
    log.persist(out_dir / "events.jsonl");
    const auto status = to_json(pipeline.status(), pipeline.options());
    write_text(out_dir / "status.json", status.dump(2) + "\n");

    fmt::print("{} clips described, {} descriptor violations, {} queries answered, {} qa violations\n",
               status["clips_completed"].get<std::size_t>(),
               status["violations"]["descriptor_budget"].get<std::size_t>(), records.size(),
               status["violations"]["qa_budget"].get<std::size_t>());
    for (const auto& r : records)
        fmt::print("  {}: {} (ttft {:.3f} s, T_ans {:.3f} s, memory {})\n", r.query_id,
                   r.chosen ? std::string(1, to_char(*r.chosen)) : std::string("unparseable"), r.ttft, r.total_time,
                   r.memory_length_used);
    fmt::print("outputs written to {}\n", out_dir.string());
    return 0;
}

int cmd_bench(const std::string& config_path, const std::string& items_path, std::size_t n_seeds,
              std::uint64_t seed_base, const std::string& label, const std::string& format, const std::string& out) {
    const RunConfig cfg = load_run_config(config_path);
    const auto fmt_kind = table_format_from_string(format);
    const auto items = load_items(items_path);
    std::vector<std::uint64_t> seeds(n_seeds);
    std::iota(seeds.begin(), seeds.end(), seed_base);

    BenchmarkConfig bc{cfg.pipeline_options(), cfg.descriptor_prompt(), cfg.reasoner_prompt(), make_factory(cfg)};
    const auto report = run_benchmark(items, build_catalog(cfg), bc, seeds);
    const AccuracyRow row = accuracy_row(label, report);
    const auto table = emit_accuracy_table(std::span(&row, 1), fmt_kind);

    const auto out_dir = out.empty() ? cfg.output_dir : std::filesystem::path(out);
    write_text(out_dir / fmt::format("accuracy.{}", extension(fmt_kind)), table);
    write_text(out_dir / "bench_answers.jsonl", answers_to_jsonl(report));
    std::string audit;
    for (const auto& a : report.audit)
        audit += nlohmann::json{{"item_id", a.item_id}, {"stream_id", a.stream_id}, {"reason", a.reason}}.dump() + "\n";
    write_text(out_dir / "bench_audit.jsonl", audit);
    std::cout << table;
    if (!report.audit.empty()) fmt::print("{} items skipped (see bench_audit.jsonl)\n", report.audit.size());
    fmt::print("queries injected at {}\n", "each item's query_time, or the end of its stream");
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_path, std::size_t repeats,
              const std::string& policy, const std::string& format, const std::string& out) {
    const RunConfig cfg = load_run_config(config_path);
    const auto fmt_kind = table_format_from_string(format);
    const auto grid = load_grid(grid_path);
    const auto frames = cfg.source.frames();

    SweepConfig sc;
    sc.base = cfg.pipeline_options();
    sc.descriptor_prompt = cfg.descriptor_prompt();
    sc.repeats = repeats;
    sc.factory = [&cfg](const SweepAxes& p) {
        auto overrides = p.backend_override;
        overrides["sleep_scale"] = 0.0;
        return make_backend(cfg.descriptor, std::nullopt, overrides);
    };
    MetricsTable table = run_sweep(grid, frames, sc);
    if (!table.rows.empty()) table.selected = select_configuration(table, SelectionPolicy::from_string(policy));

    const auto text = emit_table(table, fmt_kind);
    const auto out_dir = out.empty() ? cfg.output_dir : std::filesystem::path(out);
    write_text(out_dir / fmt::format("sweep.{}", extension(fmt_kind)), text);
    std::cout << text;
    if (!table.rows.empty() && !table.selected) fmt::print("no feasible configuration under s = {}\n", cfg.budget.s);
    return 0;
}

int cmd_ttft(const std::string& config_path, std::size_t n, const std::vector<std::string>& memory_files,
             const std::string& label, const std::string& format, const std::string& out) {
    const RunConfig cfg = load_run_config(config_path);
    const auto fmt_kind = table_format_from_string(format);
    std::vector<std::unique_ptr<TextualMemory>> memories;
    std::vector<MemoryView> views;
    for (const auto& f : memory_files) {
        memories.push_back(std::make_unique<TextualMemory>(f, load_memory(f)));
        views.push_back(memories.back()->snapshot());
    }
    auto backend = make_backend(cfg.reasoner);
    TtftOptions opts;
    opts.n_queries = n;
    TtftRow row;
    try {
        const auto report = measure_ttft(*backend, cfg.reasoner.profile, cfg.reasoner_prompt(), views, opts, cfg.budget);
        row = ttft_row(label, report);
    } catch (const CampaignError& ex) {
        row.label = label;
        row.failed = true;
        row.samples = n;
        row.failures = n;
        row.failure = ex.what();
    }
    const auto text = emit_ttft_table(std::span(&row, 1), fmt_kind);
    const auto out_dir = out.empty() ? cfg.output_dir : std::filesystem::path(out);
    write_text(out_dir / fmt::format("ttft.{}", extension(fmt_kind)), text);
    std::cout << text;
    return row.failed ? 1 : 0;
}

int cmd_serve(const std::string& config_path, const std::string& host, int port) {
    const RunConfig cfg = load_run_config(config_path);
    const auto frames = cfg.source.frames();
    auto clips = segment_stream(frames, cfg.budget.s, cfg.descriptor.profile.fps);
    TextualMemory memory(cfg.stream_id);
    EventLog log;
    Pipeline pipeline(cfg.pipeline_options(), make_backend(cfg.descriptor), make_backend(cfg.reasoner),
                      cfg.descriptor_prompt(), cfg.reasoner_prompt(), memory, log);
    ConsoleServer server(pipeline, memory);
    const int bound = server.bind(host, port);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::thread watcher([&] {
        while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
        server.stop();
    });
    pipeline.start(std::move(clips));
    fmt::print("serving on http://{}:{} (clock {})\n", host, bound, to_string(cfg.clock.mode()));
    std::fflush(stdout);
    server.listen();
    g_interrupted = true;
    watcher.join();
    pipeline.request_stop();
    pipeline.finish();
    persist(memory.snapshot(), cfg.output_dir / "memory.jsonl");
    log.persist(cfg.output_dir / "events.jsonl");
    write_text(cfg.output_dir / "answers.jsonl", records_jsonl(pipeline.answers()));
    return 0;
}

int cmd_probe(const std::string& config_path, const std::string& role) {
    const RunConfig cfg = load_run_config(config_path);
    const BackendSpec& spec = role == "descriptor" ? cfg.descriptor : cfg.reasoner;
    const auto report = make_backend(spec)->probe(spec.profile);
    fmt::print("backend    {}\nmodel      {}\nstreaming  {}\nimages     {}\ncontext    {}\n", report.backend_id,
               report.model, to_string(report.streaming), to_string(report.image_input),
               report.context_limit ? std::to_string(*report.context_limit) : std::string("unknown"));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming episodic-memory QA pipeline and benchmark harness"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::string format = "markdown";

    auto* run = app.add_subcommand("run", "Replay a stream through the pipeline and answer the configured queries");
    std::optional<std::uint64_t> run_seed;
    run->add_option("-c,--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    run->add_option("-o,--out", out, "output directory (default: config output.dir)");
    run->add_option("--seed", run_seed, "override mock seeds");

    auto* bench = app.add_subcommand("bench", "Accuracy over seeds");
    std::string items;
    std::size_t n_seeds = 10;
    std::uint64_t seed_base = 0;
    std::string label = "run";
    bench->add_option("-c,--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    bench->add_option("--items", items, "benchmark items (JSONL)")->required()->check(CLI::ExistingFile);
    bench->add_option("--seeds", n_seeds, "number of seeds")->check(CLI::PositiveNumber);
    bench->add_option("--seed-base", seed_base, "first seed");
    bench->add_option("--label", label, "row label");
    bench->add_option("--format", format, "csv or markdown");
    bench->add_option("-o,--out", out, "output directory");

    auto* sweep = app.add_subcommand("sweep", "Configuration grid sweep");
    std::string grid;
    std::size_t repeats = 10;
    std::string policy = "fidelity";
    sweep->add_option("-c,--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--grid", grid, "grid points (JSON)")->required()->check(CLI::ExistingFile);
    sweep->add_option("--repeats", repeats, "runs per point")->check(CLI::PositiveNumber);
    sweep->add_option("--policy", policy, "selection policy: fidelity or largest-model");
    sweep->add_option("--format", format, "csv or markdown");
    sweep->add_option("-o,--out", out, "output directory");

    auto* ttft = app.add_subcommand("ttft", "Time-to-first-token campaign");
    std::size_t n = 100;
    std::vector<std::string> memory_files;
    ttft->add_option("-c,--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    ttft->add_option("--n", n, "number of queries");
    ttft->add_option("--memory", memory_files, "memory fixtures (JSONL), cycled")->check(CLI::ExistingFile);
    ttft->add_option("--label", label, "row label");
    ttft->add_option("--format", format, "csv or markdown");
    ttft->add_option("-o,--out", out, "output directory");

    auto* serve = app.add_subcommand("serve", "Run the pipeline behind the console API");
    std::string host = "127.0.0.1";
    int port = 8080;
    serve->add_option("-c,--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    serve->add_option("--host", host, "bind address");
    serve->add_option("-p,--port", port, "port (0 picks a free one)");

    auto* probe = app.add_subcommand("probe", "Report backend capabilities");
    std::string role = "reasoner";
    probe->add_option("-c,--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    probe->add_option("--role", role, "descriptor or reasoner")->check(CLI::IsMember({"descriptor", "reasoner"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config, out, run_seed);
        if (*bench) return cmd_bench(config, items, n_seeds, seed_base, label, format, out);
        if (*sweep) return cmd_sweep(config, grid, repeats, policy, format, out);
        if (*ttft) return cmd_ttft(config, n, memory_files, label, format, out);
        if (*serve) return cmd_serve(config, host, port);
        if (*probe) return cmd_probe(config, role);
    } catch (const std::exception& ex) {
        fmt::print(stderr, "error: {}\n", ex.what());
        return 2;
    }
    return 0;
}
