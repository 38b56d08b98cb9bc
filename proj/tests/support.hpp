#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oemstream/ingest.hpp"
#include "oemstream/memory.hpp"
#include "oemstream/mock_backend.hpp"
#include "oemstream/options.hpp"
#include "oemstream/prompts.hpp"

namespace testing_support {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(OEMSTREAM_FIXTURE_DIR) / name;
}

// Scratch directory unique to the calling test.
inline std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "oemstream-tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// n back-to-back clips of s seconds, each with a single synthetic frame.
inline std::vector<oem::Clip> uniform_clips(std::size_t n, double s = 15.0) {
    std::vector<oem::Clip> clips;
    for (std::size_t k = 1; k <= n; ++k) {
        oem::Clip c;
        c.index = k;
        c.start = oem::from_seconds(s * double(k - 1));
        c.end = oem::from_seconds(s * double(k));
        c.frames.push_back(oem::Frame{k - 1, s * double(k - 1), fmt::format("synthetic:0:{}", k - 1)});
        clips.push_back(std::move(c));
    }
    return clips;
}

inline std::vector<oem::Candidate> abcd(const std::string& a, const std::string& b, const std::string& c,
                                        const std::string& d) {
    return {{oem::Option::A, a}, {oem::Option::B, b}, {oem::Option::C, c}, {oem::Option::D, d}};
}

inline oem::MemoryEntry entry(std::size_t k, std::string text, double gen_time = 1.0, double s = 15.0) {
    oem::MemoryEntry e;
    e.k = k;
    e.clip_start = s * double(k - 1);
    e.clip_end = s * double(k);
    e.text = std::move(text);
    e.gen_time = gen_time;
    e.output_tokens = 10;
    e.tokens_per_second = 10.0 / gen_time;
    e.backend_id = "test";
    return e;
}

inline std::shared_ptr<oem::MockBackend> constant_mock(double latency, double ttft = 0.2, std::uint64_t seed = 1) {
    oem::MockScript s;
    s.seed = seed;
    s.describe_latency = oem::Distribution::constant(latency);
    s.ttft = oem::Distribution::constant(ttft);
    return std::make_shared<oem::MockBackend>(s);
}

inline std::string default_descriptor_prompt() {
    return oem::build_descriptor_prompt(oem::DescriptorPromptTemplate::load(oem::default_template_dir() / "descriptor.txt"));
}

inline oem::ReasonerPromptTemplate default_reasoner_template() {
    return oem::ReasonerPromptTemplate::load(oem::default_template_dir() / "reasoner.txt");
}

}  // namespace testing_support
