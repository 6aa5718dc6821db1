#pragma once

#include <optional>
#include <regex>
#include <stdexcept>
#include <string>

#include "sshdecoy/bytes.hpp"

namespace sshdecoy {

// A shell prompt recognizer. The regex is matched against the style-stripped
// last line of the buffer and must reach the end of it. If the regex has a
// capture group, group 1 is taken as the path component.
class PromptPattern {
public:
    static constexpr const char* kDefaultTerminators = "$#";

    // The generic username@host:path$ shape for the given terminators.
    static PromptPattern generic(std::string terminators = kDefaultTerminators);
    // Throws std::regex_error when the pattern does not compile.
    static PromptPattern custom(std::string pattern, std::string terminators = kDefaultTerminators);

    const std::string& pattern() const { return pattern_; }
    const std::string& terminators() const { return terminators_; }
    const std::regex& regex() const { return regex_; }
    bool has_path_group() const { return has_path_group_; }

private:
    PromptPattern(std::string pattern, std::string terminators);

    std::string pattern_;
    std::string terminators_;
    std::regex regex_;
    bool has_path_group_ = false;
};

struct PromptMatch {
    // Raw byte offset where the prompt line begins (after the last LF that
    // precedes the matched text); the prompt occupies [raw_begin, end).
    std::size_t raw_begin = 0;
    std::string text;                // stripped prompt text
    std::optional<std::string> path; // path component when the pattern captures it
};

// Pure function of (buffer, pattern).
std::optional<PromptMatch> ends_with_prompt(ByteView buffer, const PromptPattern& pattern);

struct NoPromptFound : std::runtime_error {
    NoPromptFound() : std::runtime_error("no prompt-like tail in host output") {}
};

// Specializes the generic shape to the user and host observed in the first
// prompt of `sample`. The path stays variable. `username` is the login name
// and is preferred when several candidates are present.
PromptPattern learn_prompt(ByteView sample, const std::string& username,
                           std::string terminators = PromptPattern::kDefaultTerminators);

std::string regex_escape(std::string_view text);

}  // namespace sshdecoy
