#include "oemstream/prompts.hpp"

#include <array>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "oemstream/error.hpp"

namespace oem {

namespace {

std::string_view trim(std::string_view s) {
    const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r' && c != '\n'; };
    std::size_t b = 0;
    while (b < s.size() && !not_space(s[b])) ++b;
    std::size_t e = s.size();
    while (e > b && !not_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return lines;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open template " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string section_or_empty(const std::map<std::string, std::string>& sections, const std::string& name) {
    auto it = sections.find(name);
    return it == sections.end() ? std::string{} : it->second;
}

bool blank(std::string_view s) { return trim(s).empty(); }

}  // namespace

std::map<std::string, std::string> parse_template_sections(std::string_view text) {
    std::map<std::string, std::string> sections;
    std::string current;
    std::string buffer;
    bool in_section = false;
    const auto flush = [&] {
        if (in_section) sections[current] = std::string(trim(buffer));
        buffer.clear();
    };
    for (std::string_view line : split_lines(text)) {
        if (line.starts_with("### ")) {
            flush();
            current = std::string(trim(line.substr(4)));
            in_section = true;
            continue;
        }
        if (in_section) {
            buffer.append(line);
            buffer.push_back('\n');
        }
    }
    flush();
    return sections;
}

void DescriptorPromptTemplate::validate() const {
    if (blank(task_description)) throw ConfigError("descriptor template: task_description is empty");
    if (blank(detailed_instructions)) throw ConfigError("descriptor template: detailed_instructions is empty");
    if (question_templates.empty()) throw ConfigError("descriptor template: question_templates is empty");
    for (const auto& q : question_templates)
        if (blank(q)) throw ConfigError("descriptor template: question_templates contains a blank entry");
    if (icl_examples.empty()) throw ConfigError("descriptor template: icl_examples is empty");
    for (const auto& ex : icl_examples)
        if (blank(ex)) throw ConfigError("descriptor template: icl_examples contains a blank entry");
}

DescriptorPromptTemplate DescriptorPromptTemplate::from_text(std::string_view text) {
    const auto sections = parse_template_sections(text);
    DescriptorPromptTemplate tpl;
    tpl.task_description = section_or_empty(sections, "task_description");
    tpl.detailed_instructions = section_or_empty(sections, "detailed_instructions");
    tpl.question_intro = section_or_empty(sections, "question_intro");
    tpl.example_intro = section_or_empty(sections, "example_intro");

    const std::string questions = section_or_empty(sections, "question_templates");
    for (std::string_view line : split_lines(questions)) {
        line = trim(line);
        if (line.starts_with("- ") || line.starts_with("* ")) line = trim(line.substr(2));
        if (!line.empty()) tpl.question_templates.emplace_back(line);
    }

    std::string block;
    const auto push_block = [&] {
        auto t = trim(block);
        if (!t.empty()) tpl.icl_examples.emplace_back(t);
        block.clear();
    };
    const std::string examples = section_or_empty(sections, "icl_examples");
    for (std::string_view line : split_lines(examples)) {
        if (trim(line) == "---") {
            push_block();
            continue;
        }
        block.append(line);
        block.push_back('\n');
    }
    push_block();
    return tpl;
}

DescriptorPromptTemplate DescriptorPromptTemplate::load(const std::filesystem::path& path) {
    return from_text(read_file(path));
}

std::string build_descriptor_prompt(const DescriptorPromptTemplate& tpl) {
    tpl.validate();
    std::string out;
    out += tpl.task_description;
    out += "\n\n";
    out += tpl.detailed_instructions;
    out += "\n\n";
    if (!blank(tpl.question_intro)) {
        out += tpl.question_intro;
        out += '\n';
    }
    for (const auto& q : tpl.question_templates) {
        out += "- ";
        out += q;
        out += '\n';
    }
    out += '\n';
    if (!blank(tpl.example_intro)) {
        out += tpl.example_intro;
        out += "\n\n";
    }
    for (std::size_t i = 0; i < tpl.icl_examples.size(); ++i) {
        if (i > 0) out += "\n\n";
        out += tpl.icl_examples[i];
    }
    out += '\n';
    return out;
}

namespace {

constexpr std::array<std::string_view, 3> kSlots = {"{memory}", "{question}", "{candidates}"};

std::array<std::size_t, 3> slot_positions(const std::string& body) {
    std::array<std::size_t, 3> pos{};
    for (std::size_t i = 0; i < kSlots.size(); ++i) {
        pos[i] = body.find(kSlots[i]);
        if (pos[i] == std::string::npos)
            throw ConfigError("reasoner template: body lacks the " + std::string(kSlots[i]) + " slot");
        if (body.find(kSlots[i], pos[i] + 1) != std::string::npos)
            throw ConfigError("reasoner template: slot " + std::string(kSlots[i]) + " appears twice");
    }
    if (!(pos[0] < pos[1] && pos[1] < pos[2]))
        throw ConfigError("reasoner template: slots must appear as {memory}, {question}, {candidates}");
    return pos;
}

}  // namespace

void ReasonerPromptTemplate::validate() const {
    if (blank(output_instruction)) throw ConfigError("reasoner template: output_instruction is empty");
    slot_positions(body);
}

ReasonerPromptTemplate ReasonerPromptTemplate::from_text(std::string_view text) {
    const auto sections = parse_template_sections(text);
    ReasonerPromptTemplate tpl;
    tpl.preamble = section_or_empty(sections, "preamble");
    tpl.body = section_or_empty(sections, "body");
    tpl.output_instruction = section_or_empty(sections, "output_instruction");
    return tpl;
}

ReasonerPromptTemplate ReasonerPromptTemplate::load(const std::filesystem::path& path) {
    return from_text(read_file(path));
}

std::string render_candidates(std::span<const Candidate> candidates) {
    std::string out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i > 0) out += '\n';
        out += to_char(candidates[i].label);
        out += ") ";
        out += candidates[i].text;
    }
    return out;
}

std::string build_reasoner_prompt(const ReasonerPromptTemplate& tpl, std::string_view memory_text,
                                  std::string_view question, std::span<const Candidate> candidates) {
    validate_candidates(candidates);
    if (blank(tpl.output_instruction)) throw ConfigError("reasoner template: output_instruction is empty");
    const auto pos = slot_positions(tpl.body);

    // Single pass over the body so slot-like text inside the memory is left alone.
    const std::string rendered_candidates = render_candidates(candidates);
    const std::array<std::string_view, 3> values = {memory_text, question, rendered_candidates};

    std::string out;
    if (!blank(tpl.preamble)) {
        out += tpl.preamble;
        out += "\n\n";
    }
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < kSlots.size(); ++i) {
        out.append(tpl.body, cursor, pos[i] - cursor);
        out.append(values[i]);
        cursor = pos[i] + kSlots[i].size();
    }
    out.append(tpl.body, cursor, std::string::npos);
    out += "\n\n";
    out += tpl.output_instruction;
    out += '\n';
    return out;
}

std::filesystem::path default_template_dir() {
    if (const char* env = std::getenv("OEMSTREAM_TEMPLATE_DIR"); env && *env) return env;
#ifdef OEMSTREAM_TEMPLATE_DIR
    return OEMSTREAM_TEMPLATE_DIR;
#else
    return "templates";
#endif
}

}  // namespace oem
