#include "sshdecoy/command_line.hpp"

#include <cctype>

namespace sshdecoy {

std::vector<std::string> Stage::argv() const {
    std::vector<std::string> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(w.text);
    return out;
}

std::string quote_if_needed(std::string_view word) {
    if (word.empty()) return "''";
    bool plain = true;
    for (char c : word) {
        const auto uc = static_cast<unsigned char>(c);
        if (!(std::isalnum(uc) || uc >= 0x80 || std::string_view("_-./=:,+%@^").find(c) != std::string_view::npos)) {
            plain = false;
            break;
        }
    }
    if (plain) return std::string(word);
    std::string out = "'";
    for (char c : word) {
        if (c == '\'') out += "'\\''";
        else out += c;
    }
    return out + "'";
}

std::string requote(const Word& w) {
    if (w.tilde) {
        std::string rest = w.text.substr(1);
        return "~" + (rest.empty() ? std::string() : quote_if_needed(rest));
    }
    if (w.glob || w.expansion) return w.text;  // keep the shell-active characters active
    return quote_if_needed(w.text);
}

namespace {

class Parser {
public:
    explicit Parser(std::string_view raw) : s_(raw) {}

    ParsedCommand run() {
        cmd_.raw = std::string(s_);
        Stage stage;
        bool stage_started = false;
        while (true) {
            skip_blanks();
            if (at_end()) break;
            const char c = s_[i_];
            if (c == '#') break;
            if (c == '|') {
                if (peek(1) == '|' || peek(1) == '&') return fail("list operator");
                if (!stage_started) return fail("empty pipeline stage");
                cmd_.pipeline.push_back(std::move(stage));
                stage = Stage{};
                stage_started = false;
                ++i_;
                continue;
            }
            if (c == ';' || c == '(' || c == ')') return fail("list or subshell");
            if (c == '&') {
                if (peek(1) == '>') {
                    i_ += 2;
                    if (!redirect(stage, 1, "&>")) return cmd_;
                    stage_started = true;
                    continue;
                }
                return fail("list or background operator");
            }
            if (c == '<' || c == '>' || (std::isdigit(static_cast<unsigned char>(c)) && is_fd_redirect())) {
                int fd = c == '<' ? 0 : 1;
                if (std::isdigit(static_cast<unsigned char>(c))) {
                    fd = c - '0';
                    ++i_;
                }
                std::string op;
                if (s_[i_] == '<') {
                    if (peek(1) == '<') return fail("heredoc");
                    op = "<";
                    ++i_;
                } else {
                    op = ">";
                    ++i_;
                    if (!at_end() && s_[i_] == '>') {
                        op = ">>";
                        ++i_;
                    } else if (!at_end() && s_[i_] == '&') {
                        op = ">&";
                        ++i_;
                    } else if (!at_end() && s_[i_] == '|') {
                        ++i_;
                    }
                }
                if (!redirect(stage, fd, op)) return cmd_;
                stage_started = true;
                continue;
            }
            Word w;
            if (!read_word(w)) return cmd_;
            stage.words.push_back(std::move(w));
            stage_started = true;
        }
        if (stage_started) {
            if (stage.words.empty()) return fail("redirection without command");
            cmd_.pipeline.push_back(std::move(stage));
        } else if (!cmd_.pipeline.empty()) {
            return fail("empty pipeline stage");
        }
        for (const auto& st : cmd_.pipeline)
            if (st.words.empty()) return fail("redirection without command");
        return cmd_;
    }

private:
    bool at_end() const { return i_ >= s_.size(); }
    char peek(std::size_t k) const { return i_ + k < s_.size() ? s_[i_ + k] : '\0'; }
    void skip_blanks() {
        while (!at_end() && (s_[i_] == ' ' || s_[i_] == '\t')) ++i_;
    }
    static bool is_meta(char c) {
        return c == ' ' || c == '\t' || c == '|' || c == '&' || c == ';' || c == '<' || c == '>' || c == '(' ||
               c == ')';
    }
    bool is_fd_redirect() const { return peek(1) == '>' || peek(1) == '<'; }

    ParsedCommand fail(std::string reason) {
        cmd_.complex = true;
        cmd_.complex_reason = std::move(reason);
        cmd_.pipeline.clear();
        return cmd_;
    }

    bool redirect(Stage& stage, int fd, std::string op) {
        skip_blanks();
        if (at_end() || is_meta(s_[i_])) {
            fail("redirection without target");
            return false;
        }
        Word target;
        if (!read_word(target)) return false;
        stage.redirections.push_back(Redirection{fd, std::move(op), std::move(target)});
        return true;
    }

    bool read_word(Word& w) {
        const std::size_t start = i_;
        while (!at_end() && !is_meta(s_[i_])) {
            const char c = s_[i_];
            if (c == '\'') {
                const auto close = s_.find('\'', i_ + 1);
                if (close == std::string_view::npos) return fail_word("unterminated quote");
                w.text.append(s_.substr(i_ + 1, close - i_ - 1));
                w.quoted = true;
                i_ = close + 1;
            } else if (c == '"') {
                ++i_;
                w.quoted = true;
                bool closed = false;
                while (!at_end()) {
                    const char d = s_[i_];
                    if (d == '"') {
                        closed = true;
                        ++i_;
                        break;
                    }
                    if (d == '`') return fail_word("command substitution");
                    if (d == '$') {
                        if (peek(1) == '(') return fail_word("command substitution");
                        w.expansion = true;
                    }
                    if (d == '\\' && i_ + 1 < s_.size() &&
                        std::string_view("$`\"\\").find(s_[i_ + 1]) != std::string_view::npos) {
                        w.text += s_[i_ + 1];
                        i_ += 2;
                        continue;
                    }
                    w.text += d;
                    ++i_;
                }
                if (!closed) return fail_word("unterminated quote");
            } else if (c == '\\') {
                if (i_ + 1 >= s_.size()) return fail_word("line continuation");
                w.text += s_[i_ + 1];
                w.quoted = true;
                i_ += 2;
            } else if (c == '`') {
                return fail_word("command substitution");
            } else if (c == '$') {
                if (peek(1) == '(') return fail_word("command substitution");
                w.expansion = true;
                w.text += c;
                ++i_;
            } else {
                if (c == '~' && i_ == start) w.tilde = true;
                if (c == '*' || c == '?' || c == '[') w.glob = true;
                w.text += c;
                ++i_;
            }
        }
        return true;
    }

    bool fail_word(std::string reason) {
        fail(std::move(reason));
        return false;
    }

    std::string_view s_;
    std::size_t i_ = 0;
    ParsedCommand cmd_;
};

}  // namespace

ParsedCommand parse_command(std::string_view raw) { return Parser(raw).run(); }

std::string ParsedCommand::rejoin() const {
    std::string out;
    for (std::size_t s = 0; s < pipeline.size(); ++s) {
        if (s) out += " | ";
        const Stage& st = pipeline[s];
        for (std::size_t k = 0; k < st.words.size(); ++k) {
            if (k) out += ' ';
            out += requote(st.words[k]);
        }
        for (const auto& r : st.redirections) {
            out += ' ';
            const bool default_fd = (r.op == "<" && r.fd == 0) || (r.op != "<" && r.fd == 1);
            if (!default_fd && r.op != "&>") out += std::to_string(r.fd);
            out += r.op;
            out += requote(r.target);
        }
    }
    return out;
}

}  // namespace sshdecoy
