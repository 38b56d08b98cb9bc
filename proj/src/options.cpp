#include "oemstream/options.hpp"

#include <cctype>

#include <fmt/format.h>

#include "oemstream/error.hpp"

namespace oem {

std::optional<Option> option_from_char(char c) {
    switch (std::toupper(static_cast<unsigned char>(c))) {
        case 'A': return Option::A;
        case 'B': return Option::B;
        case 'C': return Option::C;
        case 'D': return Option::D;
        default: return std::nullopt;
    }
}

void validate_candidates(std::span<const Candidate> candidates) {
    if (candidates.size() != 4)
        throw InputError(fmt::format("expected 4 candidates, got {}", candidates.size()));
    for (std::size_t i = 0; i < 4; ++i) {
        if (candidates[i].label != kOptions[i])
            throw InputError(fmt::format("candidate {} is labeled {} but must be {}", i + 1,
                                         to_char(candidates[i].label), to_char(kOptions[i])));
    }
}

namespace {

bool is_wrapper(char c) {
    switch (c) {
        case '(': case ')': case '[': case ']': case '{': case '}':
        case '.': case ',': case ':': case ';': case '!': case '?':
        case '"': case '\'': case '*': case '`':
            return true;
        default:
            return std::isspace(static_cast<unsigned char>(c)) != 0;
    }
}

}  // namespace

std::optional<Option> parse_answer(std::string_view raw) {
    std::size_t b = 0;
    std::size_t e = raw.size();
    while (b < e && is_wrapper(raw[b])) ++b;
    while (e > b && is_wrapper(raw[e - 1])) --e;
    if (e - b != 1) return std::nullopt;
    return option_from_char(raw[b]);
}

std::vector<Candidate> candidates_from_json(const nlohmann::json& j) {
    std::vector<Candidate> out;
    if (j.is_object()) {
        for (Option o : kOptions) {
            const std::string key(1, to_char(o));
            if (!j.contains(key)) throw InputError("candidate " + key + " is missing");
            out.push_back({o, j.at(key).get<std::string>()});
        }
        if (j.size() != 4) throw InputError(fmt::format("expected 4 candidates, got {}", j.size()));
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            const auto& c = j[i];
            if (c.is_string()) {
                out.push_back({i < 4 ? kOptions[i] : Option::D, c.get<std::string>()});
                continue;
            }
            const auto label = c.at("label").get<std::string>();
            auto opt = label.size() == 1 ? option_from_char(label[0]) : std::nullopt;
            if (!opt) throw InputError("candidate label '" + label + "' is not one of A-D");
            out.push_back({*opt, c.at("text").get<std::string>()});
        }
    } else {
        throw InputError("candidates must be an array or an object");
    }
    validate_candidates(out);
    return out;
}

nlohmann::json candidates_to_json(std::span<const Candidate> candidates) {
    auto j = nlohmann::json::array();
    for (const auto& c : candidates) j.push_back({{"label", std::string(1, to_char(c.label))}, {"text", c.text}});
    return j;
}

}  // namespace oem
