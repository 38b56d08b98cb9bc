#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oemstream/options.hpp"

namespace oem {

/// Splits a template file into sections. A section starts at a line of the
/// form `### <name>` and runs to the next header; leading and trailing blank
/// lines are trimmed. Text before the first header is ignored.
std::map<std::string, std::string> parse_template_sections(std::string_view text);

// Per-clip descriptor prompt. Every clip is described with the same text:
// nothing from earlier clips is ever spliced in.
struct DescriptorPromptTemplate {
    std::string task_description;
    std::string detailed_instructions;
    std::string question_intro;  // optional lead-in for the template questions
    std::vector<std::string> question_templates;
    std::string example_intro;   // optional lead-in for the examples
    std::vector<std::string> icl_examples;

    // Throws ConfigError naming the first missing part.
    void validate() const;

    // Sections: task_description, detailed_instructions, question_templates
    // (one question per line, "- " prefix optional), icl_examples (blocks
    // separated by a `---` line), plus optional question_intro / example_intro.
    static DescriptorPromptTemplate from_text(std::string_view text);
    static DescriptorPromptTemplate load(const std::filesystem::path& path);
};

std::string build_descriptor_prompt(const DescriptorPromptTemplate& tpl);

struct ReasonerPromptTemplate {
    std::string preamble;
    // Must contain {memory}, {question} and {candidates} once each, in that order.
    std::string body;
    std::string output_instruction;

    void validate() const;

    static ReasonerPromptTemplate from_text(std::string_view text);
    static ReasonerPromptTemplate load(const std::filesystem::path& path);
};

std::string render_candidates(std::span<const Candidate> candidates);

std::string build_reasoner_prompt(const ReasonerPromptTemplate& tpl, std::string_view memory_text,
                                  std::string_view question, std::span<const Candidate> candidates);

// Directory holding the shipped default template files.
std::filesystem::path default_template_dir();

}  // namespace oem
