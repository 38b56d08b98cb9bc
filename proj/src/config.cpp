#include "oemstream/config.hpp"

#include <fstream>

#include "oemstream/error.hpp"
#include "oemstream/http_backend.hpp"

namespace oem {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    if (path.is_relative() && !base.empty()) return base / path;
    return path;
}

SourceSpec parse_source(const nlohmann::json& j, const std::filesystem::path& base) {
    SourceSpec s;
    if (j.contains("manifest")) {
        s.manifest = resolve(base, j.at("manifest").get<std::string>());
        return s;
    }
    const auto& syn = j.contains("synthetic") ? j.at("synthetic") : j;
    s.synthetic.duration_seconds = syn.value("duration", s.synthetic.duration_seconds);
    s.synthetic.native_fps = syn.value("fps", s.synthetic.native_fps);
    s.synthetic.seed = syn.value("seed", s.synthetic.seed);
    s.synthetic.jitter = syn.value("jitter", s.synthetic.jitter);
    if (!(s.synthetic.duration_seconds >= 0.0) || !(s.synthetic.native_fps > 0.0))
        throw ConfigError("synthetic source needs duration >= 0 and fps > 0");
    return s;
}

BackendSpec parse_backend(const nlohmann::json& j, const std::string& role) {
    BackendSpec spec;
    spec.kind = j.value("kind", std::string("mock"));
    if (spec.kind != "mock" && spec.kind != "http")
        throw ConfigError(role + ": backend kind must be mock or http, got '" + spec.kind + "'");
    spec.id = j.value("id", spec.kind + "-" + role);
    if (j.contains("profile")) spec.profile = j.at("profile").get<BackendProfile>();
    spec.mock = j.value("mock", nlohmann::json::object());
    if (spec.kind == "http" && spec.profile.endpoint.empty())
        throw ConfigError(role + ": http backend needs profile.endpoint");
    spec.profile.validate();
    if (spec.kind == "mock") (void)spec.mock.get<MockScript>();
    return spec;
}

ReplayClock parse_clock(const nlohmann::json& j) {
    const auto mode = clock_mode_from_string(j.value("mode", std::string("simulated")));
    switch (mode) {
        case ClockMode::realtime: return ReplayClock::realtime();
        case ClockMode::accelerated: return ReplayClock::accelerated(j.value("factor", 10.0));
        case ClockMode::as_fast_as_possible: return ReplayClock::as_fast_as_possible();
        case ClockMode::simulated: return ReplayClock::simulated();
    }
    return ReplayClock::simulated();
}

}  // namespace

std::vector<Frame> SourceSpec::frames() const {
    if (manifest) return load_frame_manifest(*manifest);
    return synthetic_frames(synthetic);
}

Query query_from_json(const nlohmann::json& j) {
    Query q;
    q.query_id = j.value("query_id", std::string{});
    q.question = j.at("question").get<std::string>();
    q.candidates = candidates_from_json(j.at("candidates"));
    if (j.contains("submit_time") && !j.at("submit_time").is_null()) q.submit_time = j.at("submit_time").get<double>();
    return q;
}

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    try {
        RunConfig c;
        c.stream_id = j.value("stream_id", c.stream_id);
        if (j.contains("budget")) {
            c.budget.s = j.at("budget").value("s", c.budget.s);
            c.budget.t_r = j.at("budget").value("t_r", c.budget.t_r);
        }
        c.budget.validate();
        if (j.contains("clock")) c.clock = parse_clock(j.at("clock"));

        const auto tdir = default_template_dir();
        c.descriptor_template = tdir / "descriptor.txt";
        c.reasoner_template = tdir / "reasoner.txt";
        if (j.contains("templates")) {
            const auto& t = j.at("templates");
            if (t.contains("descriptor")) c.descriptor_template = resolve(base_dir, t.at("descriptor").get<std::string>());
            if (t.contains("reasoner")) c.reasoner_template = resolve(base_dir, t.at("reasoner").get<std::string>());
        }

        c.descriptor = parse_backend(j.value("descriptor", nlohmann::json::object()), "descriptor");
        c.reasoner = parse_backend(j.value("reasoner", nlohmann::json::object()), "reasoner");
        // Mock latencies are slept out on wall clocks unless the script says otherwise.
        for (BackendSpec* spec : {&c.descriptor, &c.reasoner})
            if (spec->kind == "mock" && !spec->mock.contains("sleep_scale"))
                spec->mock["sleep_scale"] = c.clock.sleep_scale();
        if (j.contains("source")) c.source = parse_source(j.at("source"), base_dir);

        if (j.contains("pipeline")) {
            const auto& p = j.at("pipeline");
            if (p.contains("violation_policy"))
                c.violation_policy = violation_policy_from_string(p.at("violation_policy").get<std::string>());
            c.catch_up_threshold = p.value("catch_up_threshold", c.catch_up_threshold);
            c.queue_capacity = p.value("queue_capacity", c.queue_capacity);
            if (p.contains("execution")) c.execution = execution_mode_from_string(p.at("execution").get<std::string>());
            c.render.timestamps = p.value("timestamps", c.render.timestamps);
        }
        if (c.queue_capacity == 0) throw ConfigError("pipeline.queue_capacity must be at least 1");

        if (j.contains("output")) c.output_dir = resolve(base_dir, j.at("output").value("dir", std::string("out")));
        for (const auto& q : j.value("queries", nlohmann::json::array())) c.queries.push_back(query_from_json(q));

        const auto streams = j.value("streams", nlohmann::json::object());
        for (const auto& [id, s] : streams.items()) {
            StreamSpec spec;
            if (s.contains("memory"))
                spec.memory = resolve(base_dir, s.at("memory").get<std::string>());
            else
                spec.source = parse_source(s, base_dir);
            c.streams[id] = std::move(spec);
        }
        return c;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("run configuration: ") + ex.what());
    } catch (const InputError& ex) {
        throw ConfigError(std::string("run configuration: ") + ex.what());
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open configuration " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(path.string() + ": " + ex.what());
    }
    return parse_run_config(j, path.parent_path());
}

PipelineOptions RunConfig::pipeline_options() const {
    PipelineOptions o;
    o.budget = budget;
    o.clock = clock;
    o.violation_policy = violation_policy;
    o.catch_up_threshold = catch_up_threshold;
    o.queue_capacity = queue_capacity;
    o.execution = execution;
    o.render = render;
    o.descriptor_profile = descriptor.profile;
    o.reasoner_profile = reasoner.profile;
    return o;
}

std::string RunConfig::descriptor_prompt() const {
    return build_descriptor_prompt(DescriptorPromptTemplate::load(descriptor_template));
}

ReasonerPromptTemplate RunConfig::reasoner_prompt() const { return ReasonerPromptTemplate::load(reasoner_template); }

std::shared_ptr<Backend> make_backend(const BackendSpec& spec, std::optional<std::uint64_t> seed,
                                      const nlohmann::json& overrides) {
    if (spec.kind == "http") return std::make_shared<HttpBackend>(spec.id);
    nlohmann::json script = spec.mock;
    script.merge_patch(overrides);
    auto parsed = script.get<MockScript>();
    if (seed) parsed.seed = *seed;
    return std::make_shared<MockBackend>(std::move(parsed), spec.id);
}

BackendFactory make_factory(const RunConfig& config) {
    return [descriptor = config.descriptor, reasoner = config.reasoner](BackendRole role, std::uint64_t seed) {
        return make_backend(role == BackendRole::descriptor ? descriptor : reasoner, seed);
    };
}

StreamCatalog build_catalog(const RunConfig& config) {
    StreamCatalog catalog;
    const auto clips_of = [&](const SourceSpec& s) {
        const auto frames = s.frames();
        return segment_stream(frames, config.budget.s, config.descriptor.profile.fps);
    };
    if (config.streams.empty()) {
        catalog[config.stream_id].clips = clips_of(config.source);
        return catalog;
    }
    for (const auto& [id, spec] : config.streams) {
        StreamSource src;
        if (spec.memory)
            src.entries = load_memory(*spec.memory);
        else
            src.clips = clips_of(spec.source.value_or(SourceSpec{}));
        catalog[id] = std::move(src);
    }
    return catalog;
}

}  // namespace oem
