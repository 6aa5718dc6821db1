#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sshdecoy {

// One shell word after quote removal, with the facts handlers need to decide
// whether they can treat it literally.
struct Word {
    std::string text;
    bool quoted = false;     // any part was quoted or escaped
    bool tilde = false;      // begins with an unquoted '~'
    bool glob = false;       // contains an unquoted *, ? or [
    bool expansion = false;  // contains an unquoted or double-quoted '$'

    bool literal() const { return !glob && !expansion; }
    bool operator==(const Word&) const = default;
};

struct Redirection {
    int fd = 1;
    std::string op;  // ">", ">>", "<", ">&", "&>"
    Word target;

    bool writes() const { return op != "<"; }
    bool operator==(const Redirection&) const = default;
};

struct Stage {
    std::vector<Word> words;
    std::vector<Redirection> redirections;

    std::string program() const { return words.empty() ? std::string() : words.front().text; }
    std::vector<std::string> argv() const;
    bool operator==(const Stage&) const = default;
};

struct ParsedCommand {
    std::string raw;
    std::vector<Stage> pipeline;
    // Set when the line uses syntax handlers never rewrite (lists, command
    // substitution, subshells, heredocs, unterminated quotes, continuation).
    bool complex = false;
    std::string complex_reason;

    bool empty() const { return pipeline.empty() && !complex; }
    const Stage& first() const { return pipeline.front(); }
    std::string program() const { return pipeline.empty() ? std::string() : pipeline.front().program(); }
    // Canonical re-serialization: words re-quoted, stages joined by " | ".
    std::string rejoin() const;
};

ParsedCommand parse_command(std::string_view raw);

// Quotes a word only when needed for the shell to read it back verbatim.
std::string quote_if_needed(std::string_view word);
// Re-serializes a word so that parse_command reads back the same text and flags.
std::string requote(const Word& w);

}  // namespace sshdecoy
