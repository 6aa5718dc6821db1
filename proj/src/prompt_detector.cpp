#include "sshdecoy/prompt_detector.hpp"

#include "sshdecoy/terminal_codec.hpp"

namespace sshdecoy {

namespace {

// Longest prompt line considered; guards regex cost on huge unterminated output.
constexpr std::size_t kMaxPromptLine = 1024;

std::string terminator_class(const std::string& terminators) {
    std::string cls = "[";
    for (char c : terminators) {
        if (c == ']' || c == '\\' || c == '^' || c == '-') cls += '\\';
        cls += c;
    }
    cls += ']';
    return cls;
}

}  // namespace

std::string regex_escape(std::string_view text) {
    static const std::string special = R"(\^$.|?*+()[]{}-/)";
    std::string out;
    for (char c : text) {
        if (special.find(c) != std::string::npos) out += '\\';
        out += c;
    }
    return out;
}

PromptPattern::PromptPattern(std::string pattern, std::string terminators)
    : pattern_(std::move(pattern)),
      terminators_(std::move(terminators)),
      regex_(pattern_, std::regex::ECMAScript | std::regex::optimize),
      has_path_group_(regex_.mark_count() >= 1) {}

PromptPattern PromptPattern::generic(std::string terminators) {
    std::string pattern = "[A-Za-z0-9._-]+@[A-Za-z0-9._-]+:([^\\r\\n]*)" + terminator_class(terminators) + " $";
    return PromptPattern(std::move(pattern), std::move(terminators));
}

PromptPattern PromptPattern::custom(std::string pattern, std::string terminators) {
    return PromptPattern(std::move(pattern), std::move(terminators));
}

std::optional<PromptMatch> ends_with_prompt(ByteView buffer, const PromptPattern& pattern) {
    const std::size_t last_lf = buffer.rfind('\n');
    const std::size_t line_begin = last_lf == ByteView::npos ? 0 : last_lf + 1;
    ByteView raw_line = buffer.substr(line_begin);
    if (raw_line.size() > kMaxPromptLine * 4) return std::nullopt;
    const StrippedText stripped = strip_escapes(raw_line);
    std::string_view line = stripped.text;
    // A carriage return inside the line means the start was overwritten.
    if (const auto cr = line.rfind('\r'); cr != std::string_view::npos) line = line.substr(cr + 1);
    if (line.empty() || line.size() > kMaxPromptLine) return std::nullopt;

    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(line.begin(), line.end(), m, pattern.regex())) return std::nullopt;
    if (m[0].second != line.end()) return std::nullopt;

    PromptMatch match;
    match.raw_begin = line_begin;
    match.text.assign(m[0].first, m[0].second);
    if (pattern.has_path_group() && m.size() > 1 && m[1].matched) match.path = std::string(m[1].first, m[1].second);
    return match;
}

PromptPattern learn_prompt(ByteView sample, const std::string& username, std::string terminators) {
    const PromptPattern generic = PromptPattern::generic(terminators);
    const auto match = ends_with_prompt(sample, generic);
    if (!match) throw NoPromptFound();

    static const std::regex shape("([A-Za-z0-9._-]+)@([A-Za-z0-9._-]+):[^\\r\\n]*([^\\r\\n]) $");
    std::smatch parts;
    if (!std::regex_search(match->text, parts, shape)) throw NoPromptFound();
    std::string user = parts[1];
    // The generic user class also matches characters preceding the real name
    // (e.g. "(venv)alice"); prefer the login name when it is a suffix.
    if (!username.empty() && user.size() > username.size() && ends_with(user, username)) user = username;
    const std::string host = parts[2];
    const std::string terminator = parts[3];

    std::string pattern = regex_escape(user) + "@" + regex_escape(host) + ":([^\\r\\n]*)" +
                          terminator_class(terminator) + " $";
    return PromptPattern::custom(std::move(pattern), terminator);
}

}  // namespace sshdecoy
