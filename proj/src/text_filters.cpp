#include "sshdecoy/text_filters.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <regex>

namespace sshdecoy {

namespace {

std::vector<std::string_view> split_lines(ByteView input) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < input.size()) {
        const auto nl = input.find('\n', start);
        if (nl == ByteView::npos) {
            lines.push_back(input.substr(start));
            break;
        }
        lines.push_back(input.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::optional<long long> parse_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    long long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

// --- grep ------------------------------------------------------------------

std::optional<TextFilter> make_grep(const std::vector<std::string>& argv) {
    bool icase = false, invert = false, count = false, number = false, whole_line = false;
    enum class Syntax { Basic, Extended, Fixed } syntax = Syntax::Basic;
    std::vector<std::string> patterns;
    bool have_e = false;
    bool have_positional = false;
    auto add_patterns = [&](std::string_view text) {
        // A newline separates patterns, as in grep.
        std::size_t start = 0;
        for (auto nl = text.find('\n'); nl != std::string_view::npos; nl = text.find('\n', start)) {
            patterns.emplace_back(text.substr(start, nl - start));
            start = nl + 1;
        }
        patterns.emplace_back(text.substr(start));
    };
    bool options_done = false;
    for (std::size_t i = 1; i < argv.size(); ++i) {
        const std::string& a = argv[i];
        if (!options_done && a == "--") {
            options_done = true;
            continue;
        }
        if (!options_done && a.size() > 1 && a[0] == '-') {
            for (std::size_t k = 1; k < a.size(); ++k) {
                switch (a[k]) {
                case 'i': icase = true; break;
                case 'v': invert = true; break;
                case 'c': count = true; break;
                case 'n': number = true; break;
                case 'x': whole_line = true; break;
                case 'F': syntax = Syntax::Fixed; break;
                case 'E': syntax = Syntax::Extended; break;
                case 'G': syntax = Syntax::Basic; break;
                case 'e':
                    if (k + 1 < a.size()) {
                        add_patterns(std::string_view(a).substr(k + 1));
                    } else if (i + 1 < argv.size()) {
                        add_patterns(argv[++i]);
                    } else {
                        return std::nullopt;
                    }
                    have_e = true;
                    k = a.size();
                    break;
                default: return std::nullopt;
                }
            }
            continue;
        }
        if (have_positional) return std::nullopt;  // file operand
        have_positional = true;
        add_patterns(a);
    }
    if (patterns.empty() || (have_e && have_positional)) return std::nullopt;

    std::vector<std::regex> regexes;
    if (syntax != Syntax::Fixed) {
        auto flags = syntax == Syntax::Basic ? std::regex::basic : std::regex::extended;
        if (icase) flags |= std::regex::icase;
        try {
            for (const auto& p : patterns) regexes.emplace_back(p, flags);
        } catch (const std::regex_error&) {
            return std::nullopt;
        }
    }
    std::vector<std::string> needles;
    for (const auto& p : patterns) needles.push_back(icase ? lower(p) : p);

    return TextFilter([=](ByteView input) {
        Bytes out;
        long long matches = 0;
        long long lineno = 0;
        for (std::string_view line : split_lines(input)) {
            ++lineno;
            bool hit = false;
            if (!regexes.empty()) {
                for (const auto& re : regexes) {
                    hit = whole_line ? std::regex_match(line.begin(), line.end(), re)
                                     : std::regex_search(line.begin(), line.end(), re);
                    if (hit) break;
                }
            } else {
                const std::string hay = icase ? lower(line) : std::string(line);
                for (const auto& needle : needles) {
                    hit = whole_line ? hay == needle : hay.find(needle) != std::string::npos;
                    if (hit) break;
                }
            }
            if (hit == invert) continue;
            ++matches;
            if (count) continue;
            if (number) out += std::to_string(lineno) + ":";
            out.append(line);
            out += '\n';
        }
        if (count) out = std::to_string(matches) + "\n";
        return out;
    });
}

// --- wc --------------------------------------------------------------------

std::optional<TextFilter> make_wc(const std::vector<std::string>& argv) {
    bool lines = false, words = false, bytes = false, chars = false;
    for (std::size_t i = 1; i < argv.size(); ++i) {
        const std::string& a = argv[i];
        if (a.size() < 2 || a[0] != '-') return std::nullopt;
        for (std::size_t k = 1; k < a.size(); ++k) {
            switch (a[k]) {
            case 'l': lines = true; break;
            case 'w': words = true; break;
            case 'c': bytes = true; break;
            case 'm': chars = true; break;
            default: return std::nullopt;
            }
        }
    }
    if (!lines && !words && !bytes && !chars) lines = words = bytes = true;
    return TextFilter([=](ByteView input) {
        long long nl = 0, nw = 0, nc = 0, nb = static_cast<long long>(input.size());
        bool in_word = false;
        for (char c : input) {
            const auto uc = static_cast<unsigned char>(c);
            if (c == '\n') ++nl;
            if ((uc & 0xC0) != 0x80) ++nc;
            if (std::isspace(uc)) {
                in_word = false;
            } else if (!in_word) {
                in_word = true;
                ++nw;
            }
        }
        std::vector<long long> values;
        if (lines) values.push_back(nl);
        if (words) values.push_back(nw);
        if (chars) values.push_back(nc);
        if (bytes) values.push_back(nb);
        Bytes out;
        if (values.size() == 1) {
            out = std::to_string(values[0]);
        } else {
            char buf[32];
            for (std::size_t k = 0; k < values.size(); ++k) {
                std::snprintf(buf, sizeof buf, k ? " %7lld" : "%7lld", values[k]);
                out += buf;
            }
        }
        return out + "\n";
    });
}

// --- sort ------------------------------------------------------------------

// Leading numeric value the way sort -n reads it (blanks, sign, digits, point).
long double numeric_key(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::string digits;
    if (i < s.size() && s[i] == '-') digits += s[i++];
    bool seen_digit = false, seen_point = false;
    for (; i < s.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(s[i]))) {
            digits += s[i];
            seen_digit = true;
        } else if (s[i] == '.' && !seen_point) {
            digits += s[i];
            seen_point = true;
        } else {
            break;
        }
    }
    if (!seen_digit) return 0;
    return std::strtold(digits.c_str(), nullptr);
}

std::optional<TextFilter> make_sort(const std::vector<std::string>& argv) {
    bool reverse = false, numeric = false, unique = false, fold = false;
    for (std::size_t i = 1; i < argv.size(); ++i) {
        const std::string& a = argv[i];
        if (a.size() < 2 || a[0] != '-') return std::nullopt;
        for (std::size_t k = 1; k < a.size(); ++k) {
            switch (a[k]) {
            case 'r': reverse = true; break;
            case 'n': numeric = true; break;
            case 'u': unique = true; break;
            case 'f': fold = true; break;
            default: return std::nullopt;
            }
        }
    }
    return TextFilter([=](ByteView input) {
        std::vector<std::string_view> lines = split_lines(input);
        // Key comparison: <0, 0, >0 on the sort key only.
        auto key_cmp = [&](std::string_view a, std::string_view b) -> int {
            if (numeric) {
                const long double x = numeric_key(a), y = numeric_key(b);
                return x < y ? -1 : (x > y ? 1 : 0);
            }
            if (fold) {
                // sort -f folds to upper case, which orders '_' after letters.
                std::string ux(a), uy(b);
                for (auto& c : ux) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                for (auto& c : uy) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
                const int c = ux.compare(uy);
                return c < 0 ? -1 : (c > 0 ? 1 : 0);
            }
            const int c = a.compare(b);
            return c < 0 ? -1 : (c > 0 ? 1 : 0);
        };
        auto full_cmp = [&](std::string_view a, std::string_view b) -> int {
            int c = key_cmp(a, b);
            if (c == 0 && !unique) c = a.compare(b) < 0 ? -1 : (a.compare(b) > 0 ? 1 : 0);
            return reverse ? -c : c;
        };
        std::stable_sort(lines.begin(), lines.end(),
                         [&](std::string_view a, std::string_view b) { return full_cmp(a, b) < 0; });
        Bytes out;
        std::optional<std::string_view> prev;
        for (auto line : lines) {
            if (unique && prev && key_cmp(*prev, line) == 0) continue;
            prev = line;
            out.append(line);
            out += '\n';
        }
        return out;
    });
}

// --- uniq ------------------------------------------------------------------

std::optional<TextFilter> make_uniq(const std::vector<std::string>& argv) {
    bool count = false, only_dup = false, only_unique = false, icase = false;
    for (std::size_t i = 1; i < argv.size(); ++i) {
        const std::string& a = argv[i];
        if (a.size() < 2 || a[0] != '-') return std::nullopt;
        for (std::size_t k = 1; k < a.size(); ++k) {
            switch (a[k]) {
            case 'c': count = true; break;
            case 'd': only_dup = true; break;
            case 'u': only_unique = true; break;
            case 'i': icase = true; break;
            default: return std::nullopt;
            }
        }
    }
    return TextFilter([=](ByteView input) {
        const auto lines = split_lines(input);
        Bytes out;
        std::size_t i = 0;
        while (i < lines.size()) {
            std::size_t j = i + 1;
            while (j < lines.size() && (icase ? lower(lines[j]) == lower(lines[i]) : lines[j] == lines[i])) ++j;
            const std::size_t n = j - i;
            const bool emit = (!only_dup || n > 1) && (!only_unique || n == 1);
            if (emit) {
                if (count) {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "%7zu ", n);
                    out += buf;
                }
                out.append(lines[i]);
                out += '\n';
            }
            i = j;
        }
        return out;
    });
}

}  // namespace

std::optional<LineCount> parse_line_count(const std::vector<std::string>& args, std::size_t& operand_index,
                                          bool tail) {
    LineCount lc;
    std::size_t i = 1;
    auto set_value = [&](std::string_view v, bool bytes) -> bool {
        lc.bytes = bytes;
        if (!v.empty() && v[0] == '+') {
            if (!tail) return false;
            lc.from_start = true;
            v.remove_prefix(1);
        } else if (!v.empty() && v[0] == '-') {
            if (tail) {
                v.remove_prefix(1);
            } else {
                lc.all_but = true;
                v.remove_prefix(1);
            }
        }
        auto n = parse_number(v);
        if (!n || *n < 0) return false;
        lc.count = *n;
        return true;
    };
    for (; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--") {
            ++i;
            break;
        }
        if (a.size() < 2 || a[0] != '-') break;
        if (a == "-n" || a == "-c") {
            if (i + 1 >= args.size() || !set_value(args[i + 1], a == "-c")) return std::nullopt;
            ++i;
        } else if (starts_with(a, "-n") || starts_with(a, "-c")) {
            if (!set_value(std::string_view(a).substr(2), a[1] == 'c')) return std::nullopt;
        } else if (std::isdigit(static_cast<unsigned char>(a[1]))) {
            if (!set_value(std::string_view(a).substr(1), false)) return std::nullopt;
        } else {
            return std::nullopt;
        }
    }
    operand_index = i;
    return lc;
}

Bytes head_lines(ByteView input, const LineCount& lc) {
    const auto n = static_cast<std::size_t>(lc.count);
    if (lc.bytes) {
        if (lc.all_but) return Bytes(input.substr(0, input.size() > n ? input.size() - n : 0));
        return Bytes(input.substr(0, std::min(n, input.size())));
    }
    // Offsets of line ends.
    std::vector<std::size_t> ends;
    for (std::size_t i = 0; i < input.size(); ++i)
        if (input[i] == '\n') ends.push_back(i + 1);
    if (!input.empty() && input.back() != '\n') ends.push_back(input.size());
    if (lc.all_but) {
        if (ends.size() <= n) return {};
        return Bytes(input.substr(0, ends[ends.size() - n - 1]));
    }
    if (n == 0) return {};
    if (ends.size() <= n) return Bytes(input);
    return Bytes(input.substr(0, ends[n - 1]));
}

Bytes tail_lines(ByteView input, const LineCount& lc) {
    const auto n = static_cast<std::size_t>(lc.count);
    if (lc.bytes) {
        if (lc.from_start) return n <= 1 ? Bytes(input) : Bytes(input.substr(std::min(n - 1, input.size())));
        return Bytes(input.substr(input.size() > n ? input.size() - n : 0));
    }
    std::vector<std::size_t> starts{0};
    for (std::size_t i = 0; i + 1 < input.size(); ++i)
        if (input[i] == '\n') starts.push_back(i + 1);
    if (input.empty()) return {};
    if (lc.from_start) {
        const std::size_t first = n == 0 ? 0 : n - 1;
        if (first >= starts.size()) return {};
        return Bytes(input.substr(starts[first]));
    }
    if (n == 0) return {};
    if (starts.size() <= n) return Bytes(input);
    return Bytes(input.substr(starts[starts.size() - n]));
}

std::optional<TextFilter> make_filter(const std::vector<std::string>& argv) {
    if (argv.empty()) return std::nullopt;
    const std::string& prog = argv[0];
    if (prog == "grep") return make_grep(argv);
    if (prog == "egrep") {
        auto copy = argv;
        copy.insert(copy.begin() + 1, "-E");
        return make_grep(copy);
    }
    if (prog == "fgrep") {
        auto copy = argv;
        copy.insert(copy.begin() + 1, "-F");
        return make_grep(copy);
    }
    if (prog == "wc") return make_wc(argv);
    if (prog == "sort") return make_sort(argv);
    if (prog == "uniq") return make_uniq(argv);
    if (prog == "head" || prog == "tail") {
        std::size_t operand = 0;
        const bool tail = prog == "tail";
        auto lc = parse_line_count(argv, operand, tail);
        if (!lc || operand != argv.size()) return std::nullopt;
        const LineCount count = *lc;
        if (tail) return TextFilter([count](ByteView in) { return tail_lines(in, count); });
        return TextFilter([count](ByteView in) { return head_lines(in, count); });
    }
    return std::nullopt;
}

}  // namespace sshdecoy
