#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace oem {

// Closed-ended answer alphabet.
enum class Option : char { A = 'A', B = 'B', C = 'C', D = 'D' };

inline constexpr Option kOptions[] = {Option::A, Option::B, Option::C, Option::D};

inline char to_char(Option o) { return static_cast<char>(o); }
std::optional<Option> option_from_char(char c);

struct Candidate {
    Option label = Option::A;
    std::string text;

    bool operator==(const Candidate&) const = default;
};

// Throws InputError unless there are exactly four candidates labeled A, B, C, D in order.
void validate_candidates(std::span<const Candidate> candidates);

/// Maps a raw model answer onto an option letter.
///
/// Accepts a single letter A-D in either case, optionally wrapped in
/// whitespace, brackets or trailing punctuation ("B", "b)", " (c) ", "D.").
/// Anything else (several letters, words, empty text) is unparseable.
std::optional<Option> parse_answer(std::string_view raw);

// Accepts ["a", "b", "c", "d"], [{"label": "A", "text": "a"}, ...] or
// {"A": "a", ...}. Labels are validated.
std::vector<Candidate> candidates_from_json(const nlohmann::json& j);
nlohmann::json candidates_to_json(std::span<const Candidate> candidates);

}  // namespace oem
