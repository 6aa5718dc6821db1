#include "sshdecoy/mock_host.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <ctime>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "sshdecoy/ls_format.hpp"
#include "sshdecoy/text_filters.hpp"

namespace sshdecoy {

// --- script -------------------------------------------------------------------

void MockScript::add_file(const std::string& path, Bytes content, unsigned mode) {
    MockFile f;
    f.content = std::move(content);
    f.mode = mode;
    f.mtime = now - 3600;
    files[path] = std::move(f);
}

void MockScript::add_dir(const std::string& path) {
    MockFile f;
    f.directory = true;
    f.mode = 0755;
    f.mtime = now - 7200;
    files[path] = std::move(f);
}

MockScript MockScript::standard() {
    MockScript s;
    const std::string h = s.home_dir();
    s.add_dir(h);
    s.add_dir(h + "/docs");
    s.add_file(h + "/.bashrc", "# ~/.bashrc\nHISTCONTROL=ignorespace\n");
    s.add_file(h + "/.profile", "# ~/.profile\n");
    s.add_file(h + "/notes.txt", "buy milk\ncall bob\n");
    s.add_file(h + "/data.txt", "alpha 1\nbeta 2\ngamma 3\n");
    s.add_file(h + "/docs/readme.md", "# Docs\n");
    s.add_file(h + "/run.sh", "#!/bin/sh\necho run\n", 0755);
    s.add_file("/etc/hostname", "mock\n");
    s.add_file("/etc/passwd", "root:x:0:0:root:/root:/bin/bash\nalice:x:1000:1000:Alice,,,:/home/alice:/bin/bash\n");
    s.add_file("/proc/version",
               "Linux version 5.10.0-8-amd64 (debian-kernel@lists.debian.org) (gcc-10 (Debian 10.2.1-6) 10.2.1 "
               "20210110, GNU ld (GNU Binutils for Debian) 2.35.2) #1 SMP Debian 5.10.46-4 (2021-08-03)\n");
    s.add_dir("/tmp");
    return s;
}

namespace {

std::string scalar_or(const YAML::Node& n, const std::string& fallback) { return n ? n.as<std::string>() : fallback; }

}  // namespace

MockScript MockScript::parse(std::string_view yaml) {
    const YAML::Node root = YAML::Load(std::string(yaml));
    MockScript s;
    s.username = scalar_or(root["username"], s.username);
    s.password = scalar_or(root["password"], s.password);
    s.hostname = scalar_or(root["hostname"], s.hostname);
    s.home = scalar_or(root["home"], s.home);
    s.banner = scalar_or(root["banner"], s.banner);
    s.motd = scalar_or(root["motd"], s.motd);
    if (root["terminator"]) s.terminator = root["terminator"].as<std::string>().at(0);
    if (root["history_ignore_space"]) s.history_ignore_space = root["history_ignore_space"].as<bool>();
    if (root["color"]) s.color = root["color"].as<bool>();
    if (root["ls_tabs"]) s.ls_tabs = root["ls_tabs"].as<bool>();
    if (root["now"]) s.now = root["now"].as<std::int64_t>();
    if (const auto k = root["kernel"]) {
        s.sysname = scalar_or(k["sysname"], s.sysname);
        s.release = scalar_or(k["release"], s.release);
        s.version = scalar_or(k["version"], s.version);
        s.machine = scalar_or(k["machine"], s.machine);
    }
    if (const auto files = root["files"]) {
        for (const auto& f : files) {
            const std::string path = f["path"].as<std::string>();
            if (f["dir"] && f["dir"].as<bool>()) {
                s.add_dir(path);
            } else {
                unsigned mode = 0644;
                if (f["mode"]) {
                    const std::string m = f["mode"].as<std::string>();
                    std::from_chars(m.data(), m.data() + m.size(), mode, 8);
                }
                s.add_file(path, scalar_or(f["content"], ""), mode);
            }
            if (f["mtime"]) s.files[path].mtime = f["mtime"].as<std::int64_t>();
        }
    }
    if (const auto acc = root["accounts"])
        for (const auto& a : acc) s.accounts[a.first.as<std::string>()] = a.second.as<std::string>();
    if (!s.files.count(s.home_dir())) s.add_dir(s.home_dir());
    return s;
}

std::optional<MockScript> MockScript::login(const std::string& user, const std::string& pass) const {
    if (user == username) return pass == password ? std::optional<MockScript>(*this) : std::nullopt;
    auto it = accounts.find(user);
    if (it == accounts.end() || it->second != pass) return std::nullopt;
    MockScript s = *this;
    s.username = user;
    s.password = pass;
    s.home.clear();
    const std::string from = home_dir();
    const std::string to = s.home_dir();
    for (const auto& [path, file] : files) {
        if (path == from) s.files[to] = file;
        else if (path.size() > from.size() && path.compare(0, from.size() + 1, from + "/") == 0)
            s.files[to + path.substr(from.size())] = file;
    }
    return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read mock script " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse(text.str());
}

// --- helpers --------------------------------------------------------------------

namespace {

// The mock keeps its own UTF-8 handling so it stays independent of the codec.
std::string to_utf8(std::u32string_view s) {
    std::string out;
    for (char32_t c : s) {
        if (c < 0x80) {
            out += static_cast<char>(c);
        } else if (c < 0x800) {
            out += static_cast<char>(0xC0 | (c >> 6));
            out += static_cast<char>(0x80 | (c & 0x3F));
        } else if (c < 0x10000) {
            out += static_cast<char>(0xE0 | (c >> 12));
            out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (c & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (c >> 18));
            out += static_cast<char>(0x80 | ((c >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((c >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (c & 0x3F));
        }
    }
    return out;
}

std::u32string from_utf8(std::string_view s) {
    std::u32string out;
    for (std::size_t i = 0; i < s.size();) {
        const auto b = static_cast<unsigned char>(s[i]);
        std::size_t n = b < 0x80 ? 1 : (b >> 5) == 6 ? 2 : (b >> 4) == 14 ? 3 : (b >> 3) == 30 ? 4 : 1;
        if (i + n > s.size()) n = 1;
        char32_t c = n == 1 ? b : n == 2 ? (b & 0x1F) : n == 3 ? (b & 0x0F) : (b & 0x07);
        for (std::size_t k = 1; k < n; ++k) c = (c << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        out += c;
        i += n;
    }
    return out;
}

Bytes crlf(ByteView s) {
    Bytes out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\n' && (i == 0 || s[i - 1] != '\r')) out += '\r';
        out += s[i];
    }
    return out;
}

std::string mock_normalize(const std::string& path) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i <= path.size()) {
        auto j = path.find('/', i);
        if (j == std::string::npos) j = path.size();
        std::string part = path.substr(i, j - i);
        if (part == "..") {
            if (!parts.empty()) parts.pop_back();
        } else if (!part.empty() && part != ".") {
            parts.push_back(part);
        }
        i = j + 1;
    }
    std::string out;
    for (const auto& p : parts) out += "/" + p;
    return out.empty() ? "/" : out;
}

struct Result {
    Bytes out;
    Bytes err;
    int status = 0;
};

struct Tok {
    std::string text;
    bool quoted = false;
};

// Shell-ish word splitting: quotes, backslashes, and the operators | ; > >> 2>.
std::vector<Tok> lex(const std::string& line) {
    std::vector<Tok> toks;
    std::size_t i = 0;
    while (i < line.size()) {
        const char c = line[i];
        if (c == ' ' || c == '\t') {
            ++i;
            continue;
        }
        if (c == '|' || c == ';') {
            toks.push_back({std::string(1, c), false});
            ++i;
            continue;
        }
        if (c == '>' || (c == '2' && i + 1 < line.size() && line[i + 1] == '>')) {
            std::string op;
            if (c == '2') {
                op = "2";
                ++i;
            }
            op += '>';
            ++i;
            if (i < line.size() && line[i] == '>') {
                op += '>';
                ++i;
            }
            toks.push_back({op, false});
            continue;
        }
        Tok t;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '|' && line[i] != ';' &&
               line[i] != '>') {
            if (line[i] == '\'') {
                t.quoted = true;
                auto e = line.find('\'', i + 1);
                if (e == std::string::npos) e = line.size();
                t.text += line.substr(i + 1, e - i - 1);
                i = std::min(e + 1, line.size());
            } else if (line[i] == '"') {
                t.quoted = true;
                ++i;
                while (i < line.size() && line[i] != '"') {
                    if (line[i] == '\\' && i + 1 < line.size()) ++i;
                    t.text += line[i++];
                }
                if (i < line.size()) ++i;
            } else if (line[i] == '\\' && i + 1 < line.size()) {
                t.quoted = true;
                t.text += line[i + 1];
                i += 2;
            } else {
                t.text += line[i++];
            }
        }
        toks.push_back(std::move(t));
    }
    return toks;
}

bool glob_match(std::string_view pat, std::string_view s) {
    if (pat.empty()) return s.empty();
    if (pat[0] == '*') {
        for (std::size_t k = 0; k <= s.size(); ++k)
            if (glob_match(pat.substr(1), s.substr(k))) return true;
        return false;
    }
    if (s.empty()) return false;
    if (pat[0] == '?' || pat[0] == s[0]) return glob_match(pat.substr(1), s.substr(1));
    return false;
}

std::string human(std::uint64_t bytes) {
    if (bytes < 1024) return std::to_string(bytes);
    const char* units = "KMGTPE";
    std::uint64_t div = 1024;
    int u = 0;
    while (bytes >= div * 1024 && u < 5) {
        div *= 1024;
        ++u;
    }
    // ls rounds up: one decimal below 10, whole units otherwise.
    const std::uint64_t tenths = (bytes * 10 + div - 1) / div;
    char buf[32];
    if (tenths < 100) {
        std::snprintf(buf, sizeof buf, "%llu.%llu%c", static_cast<unsigned long long>(tenths / 10),
                      static_cast<unsigned long long>(tenths % 10), units[u]);
    } else {
        const std::uint64_t whole = (bytes + div - 1) / div;
        if (whole >= 1024 && u < 5) std::snprintf(buf, sizeof buf, "1.0%c", units[u + 1]);
        else std::snprintf(buf, sizeof buf, "%llu%c", static_cast<unsigned long long>(whole), units[u]);
    }
    return buf;
}

std::string mode_string(const MockFile& f) {
    std::string s(1, f.directory ? 'd' : '-');
    for (int shift = 6; shift >= 0; shift -= 3) {
        s += (f.mode >> (shift + 2)) & 1 ? 'r' : '-';
        s += (f.mode >> (shift + 1)) & 1 ? 'w' : '-';
        s += (f.mode >> shift) & 1 ? 'x' : '-';
    }
    return s;
}

}  // namespace

// --- commands ---------------------------------------------------------------------

class MockCommands {
public:
    MockCommands(MockShell& sh, Millis now) : sh_(sh), s_(sh.script_), now_(now) {}

    std::string abs(const std::string& p) const {
        if (p == "~") return s_.home_dir();
        if (starts_with(p, "~/")) return mock_normalize(s_.home_dir() + p.substr(1));
        if (!p.empty() && p[0] == '/') return mock_normalize(p);
        return mock_normalize(sh_.cwd_ + "/" + p);
    }

    bool is_dir(const std::string& path) const {
        if (path == "/") return true;
        auto it = s_.files.find(path);
        if (it != s_.files.end()) return it->second.directory;
        auto next = s_.files.lower_bound(path + "/");
        return next != s_.files.end() && starts_with(next->first, path + "/");
    }
    bool exists(const std::string& path) const { return s_.files.count(path) || is_dir(path); }
    const MockFile* file(const std::string& path) const {
        auto it = s_.files.find(path);
        return it == s_.files.end() || it->second.directory ? nullptr : &it->second;
    }
    MockFile meta(const std::string& path) const {
        auto it = s_.files.find(path);
        if (it != s_.files.end()) return it->second;
        MockFile d;
        d.directory = true;
        d.mode = 0755;
        d.mtime = s_.now - 7200;
        return d;
    }

    std::vector<std::string> children(const std::string& dir) const {
        std::set<std::string> names;
        const std::string prefix = dir == "/" ? "/" : dir + "/";
        for (auto it = s_.files.lower_bound(prefix); it != s_.files.end() && starts_with(it->first, prefix); ++it) {
            const std::string rest = it->first.substr(prefix.size());
            if (rest.empty()) continue;
            names.insert(rest.substr(0, rest.find('/')));
        }
        return {names.begin(), names.end()};
    }

    std::vector<std::string> expand(const std::vector<Tok>& words) const {
        std::vector<std::string> out;
        for (const auto& w : words) {
            if (!w.quoted && w.text.find_first_of("*?") != std::string::npos && w.text.find('/') == std::string::npos) {
                std::vector<std::string> matches;
                for (const auto& n : children(sh_.cwd_))
                    if ((n[0] != '.' || w.text[0] == '.') && glob_match(w.text, n)) matches.push_back(n);
                if (!matches.empty()) {
                    out.insert(out.end(), matches.begin(), matches.end());
                    continue;
                }
            }
            if (!w.quoted && (w.text == "~" || starts_with(w.text, "~/")))
                out.push_back(s_.home_dir() + w.text.substr(1));
            else
                out.push_back(w.text);
        }
        return out;
    }

    Result run(const std::vector<std::string>& argv, const Bytes& input) {
        Result r;
        if (argv.empty()) return r;
        const std::string& p = argv[0];
        if (p == "echo") return echo(argv);
        if (p == "ls") return ls(argv);
        if (p == "cat") return cat(argv, input);
        if (p == "head" || p == "tail") return head(argv, input);
        if (p == "grep" || p == "egrep" || p == "fgrep" || p == "wc" || p == "sort" || p == "uniq")
            return filter(argv, input);
        if (p == "pwd") return {sh_.cwd_ + "\n", {}, 0};
        if (p == "cd") return cd(argv);
        if (p == "whoami") return {s_.username + "\n", {}, 0};
        if (p == "hostname") return {s_.hostname + "\n", {}, 0};
        if (p == "id")
            return {"uid=1000(" + s_.username + ") gid=1000(" + s_.username + ") groups=1000(" + s_.username + ")\n",
                    {},
                    0};
        if (p == "uname") return uname(argv);
        if (p == "history") return history();
        if (p == "true" || p == ":") return r;
        if (p == "false") return {{}, {}, 1};
        if (p == "clear") return {"\x1b[H\x1b[2J", {}, 0};
        if (p == "touch") {
            for (std::size_t i = 1; i < argv.size(); ++i)
                if (!exists(abs(argv[i]))) sh_.script_.add_file(abs(argv[i]), "");
            return r;
        }
        if (p == "rm") {
            for (std::size_t i = 1; i < argv.size(); ++i) {
                if (!file(abs(argv[i]))) {
                    r.err += "rm: cannot remove '" + argv[i] + "': No such file or directory\n";
                    r.status = 1;
                } else {
                    sh_.script_.files.erase(abs(argv[i]));
                }
            }
            return r;
        }
        if (p == "command" && argv.size() > 1) return run({argv.begin() + 1, argv.end()}, input);
        if (p == "sleep") {
            double secs = argv.size() > 1 ? std::atof(argv[1].c_str()) : 0;
            sh_.mode_ = MockShell::Mode::Busy;
            sh_.busy_until_ = now_ + Millis(static_cast<long long>(secs * 1000));
            return r;
        }
        if (p == "hang") {
            sh_.mode_ = MockShell::Mode::Hang;
            return r;
        }
        if (p == "vimlike") {
            sh_.mode_ = MockShell::Mode::Vimlike;
            return {"\x1b[?1049h\x1b[H\x1b[2J~\n~\n\"notes.txt\" 2L, 18B\n" + sh_.prompt(), {}, 0};
        }
        if (p == "exit" || p == "logout") {
            sh_.exited_ = true;
            return {"logout\n", {}, 0};
        }
        return {{}, "bash: " + p + ": command not found\n", 127};
    }

    Result echo(const std::vector<std::string>& argv) {
        Result r;
        std::size_t i = 1;
        bool newline = true;
        if (i < argv.size() && argv[i] == "-n") {
            newline = false;
            ++i;
        }
        for (std::size_t k = i; k < argv.size(); ++k) {
            if (k > i) r.out += ' ';
            r.out += argv[k];
        }
        if (newline) r.out += '\n';
        return r;
    }

    Result cd(const std::vector<std::string>& argv) {
        std::string target = argv.size() > 1 ? argv[1] : s_.home_dir();
        if (target == "-") target = sh_.oldpwd_.empty() ? sh_.cwd_ : sh_.oldpwd_;
        const std::string path = abs(target);
        if (!exists(path)) return {{}, "bash: cd: " + target + ": No such file or directory\n", 1};
        if (!is_dir(path)) return {{}, "bash: cd: " + target + ": Not a directory\n", 1};
        sh_.oldpwd_ = sh_.cwd_;
        sh_.cwd_ = path;
        return {};
    }

    Result uname(const std::vector<std::string>& argv) {
        std::string flags;
        for (std::size_t i = 1; i < argv.size(); ++i) {
            const std::string& a = argv[i];
            if (a == "--all") flags += 'a';
            else if (a.size() > 1 && a[0] == '-' && a[1] != '-') flags += a.substr(1);
            else return {{}, "uname: extra operand '" + a + "'\n", 1};
        }
        if (flags.empty()) flags = "s";
        const bool all = flags.find('a') != std::string::npos;
        std::vector<std::string> parts;
        auto want = [&](char c) { return all || flags.find(c) != std::string::npos; };
        if (want('s')) parts.push_back(s_.sysname);
        if (want('n')) parts.push_back(s_.hostname);
        if (want('r')) parts.push_back(s_.release);
        if (want('v')) parts.push_back(s_.version);
        if (want('m')) parts.push_back(s_.machine);
        if (want('o')) parts.push_back("GNU/Linux");
        std::string out;
        for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? " " : "") + parts[i];
        return {out + "\n", {}, 0};
    }

    Result history() {
        Result r;
        for (std::size_t i = 0; i < sh_.history_.size(); ++i) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%5zu  ", i + 1);
            r.out += buf + sh_.history_[i] + "\n";
        }
        return r;
    }

    Result cat(const std::vector<std::string>& argv, const Bytes& input) {
        Result r;
        std::vector<std::string> ops;
        bool done = false;
        for (std::size_t i = 1; i < argv.size(); ++i) {
            if (!done && argv[i] == "--") {
                done = true;
                continue;
            }
            if (!done && argv[i].size() > 1 && argv[i][0] == '-')
                return {{}, "cat: invalid option -- '" + argv[i].substr(1, 1) + "'\n", 1};
            ops.push_back(argv[i]);
        }
        if (ops.empty()) return {input, {}, 0};
        for (const auto& op : ops) {
            const std::string path = abs(op);
            if (const MockFile* f = file(path)) {
                r.out += f->content;
            } else if (is_dir(path)) {
                r.out += "cat: " + op + ": Is a directory\n";  // interleaved on the terminal
                r.status = 1;
            } else {
                r.out += "cat: " + op + ": No such file or directory\n";
                r.status = 1;
            }
        }
        return r;
    }

    Result head(const std::vector<std::string>& argv, const Bytes& input) {
        const bool tail = argv[0] == "tail";
        std::size_t idx = 0;
        auto lc = parse_line_count(argv, idx, tail);
        if (!lc) return {{}, argv[0] + ": invalid option\n", 1};
        std::vector<std::string> ops(argv.begin() + static_cast<std::ptrdiff_t>(idx), argv.end());
        auto cut = [&](ByteView in) { return tail ? tail_lines(in, *lc) : head_lines(in, *lc); };
        if (ops.empty()) return {cut(input), {}, 0};
        Result r;
        bool first = true;
        for (const auto& op : ops) {
            const MockFile* f = file(abs(op));
            if (!f) {
                r.out += argv[0] + ": cannot open '" + op + "' for reading: No such file or directory\n";
                r.status = 1;
                continue;
            }
            if (ops.size() > 1) {
                r.out += (first ? "" : "\n") + std::string("==> ") + op + " <==\n";
                first = false;
            }
            r.out += cut(f->content);
        }
        return r;
    }

    Result filter(const std::vector<std::string>& argv, const Bytes& input) {
        // File operands: read them here and feed the filter on stdin.
        std::vector<std::string> args{argv[0]};
        Bytes data = input;
        bool have_files = false;
        bool pattern_taken = false;
        const bool is_grep = argv[0].find("grep") != std::string::npos;
        for (std::size_t i = 1; i < argv.size(); ++i) {
            const std::string& a = argv[i];
            if (a.size() > 1 && a[0] == '-') {
                args.push_back(a);
                if (a == "-e") {
                    if (i + 1 < argv.size()) args.push_back(argv[++i]);
                    pattern_taken = true;
                }
                continue;
            }
            if (is_grep && !pattern_taken) {
                args.push_back(a);
                pattern_taken = true;
                continue;
            }
            if (!have_files) data.clear();
            have_files = true;
            if (const MockFile* f = file(abs(a))) data += f->content;
            else return {{}, argv[0] + ": " + a + ": No such file or directory\n", 2};
        }
        auto f = make_filter(args);
        if (!f) return {{}, argv[0] + ": unsupported usage\n", 2};
        return {(*f)(data), {}, 0};
    }

    Result ls(const std::vector<std::string>& argv) {
        bool all = false, lng = false, one = false, hum = false, slash = false;
        std::vector<std::string> ops;
        bool done = false;
        for (std::size_t i = 1; i < argv.size(); ++i) {
            const std::string& a = argv[i];
            if (done || a.size() < 2 || a[0] != '-') {
                ops.push_back(a);
                continue;
            }
            if (a == "--") {
                done = true;
                continue;
            }
            if (starts_with(a, "--color")) continue;
            if (a == "--all") {
                all = true;
                continue;
            }
            for (std::size_t k = 1; k < a.size(); ++k) {
                switch (a[k]) {
                    case 'a': all = true; break;
                    case 'l': lng = true; break;
                    case '1': one = true; break;
                    case 'h': hum = true; break;
                    case 'p': slash = true; break;
                    default:
                        return {{}, "ls: invalid option -- '" + std::string(1, a[k]) +
                                        "'\nTry 'ls --help' for more information.\n", 2};
                }
            }
        }
        if (ops.empty()) ops.push_back(".");
        Result r;
        std::vector<std::string> file_ops, dir_ops;
        for (const auto& op : ops) {
            const std::string path = abs(op);
            if (!exists(path)) {
                r.err += "ls: cannot access '" + op + "': No such file or directory\n";
                r.status = 2;
            } else if (is_dir(path)) {
                dir_ops.push_back(op);
            } else {
                file_ops.push_back(op);
            }
        }
        struct Ent {
            std::string name;
            MockFile f;
        };
        auto render = [&](const std::vector<Ent>& ents, bool with_total) {
            std::vector<std::string> cells;
            for (const auto& e : ents) {
                std::string n = e.name + (slash && e.f.directory ? "/" : "");
                const bool paint = s_.color && sh_.pty_;
                if (paint && e.f.directory) n = "\x1b[01;34m" + n + "\x1b[0m";
                else if (paint && (e.f.mode & 0111)) n = "\x1b[01;32m" + n + "\x1b[0m";
                cells.push_back(n);
            }
            if (lng) return long_rows(ents, cells, with_total, hum);
            if (one || !sh_.pty_) {
                std::string out;
                for (const auto& c : cells) out += c + "\n";
                return out;
            }
            std::vector<std::size_t> widths;
            for (const auto& e : ents) widths.push_back(from_utf8(e.name).size() + (slash && e.f.directory ? 1 : 0));
            return columns(cells, widths);
        };
        std::vector<Ent> fents;
        for (const auto& op : file_ops) fents.push_back({op, meta(abs(op))});
        std::sort(fents.begin(), fents.end(), [](const Ent& a, const Ent& b) { return a.name < b.name; });
        r.out += render(fents, false);
        const bool headers = ops.size() > 1;
        for (std::size_t d = 0; d < dir_ops.size(); ++d) {
            const std::string path = abs(dir_ops[d]);
            std::vector<Ent> ents;
            if (all) {
                ents.push_back({".", meta(path)});
                ents.push_back({"..", meta(mock_normalize(path + "/.."))});
            }
            for (const auto& n : children(path)) {
                if (n[0] == '.' && !all) continue;
                ents.push_back({n, meta(path == "/" ? "/" + n : path + "/" + n)});
            }
            std::sort(ents.begin(), ents.end(), [](const Ent& a, const Ent& b) { return a.name < b.name; });
            if (headers) r.out += (d || !fents.empty() ? "\n" : "") + dir_ops[d] + ":\n";
            r.out += render(ents, true);
        }
        return r;
    }

    // GNU layout: the most columns whose total width stays below the screen
    // width, each column as wide as its longest name plus two (the last plus none).
    std::string columns(const std::vector<std::string>& cells, const std::vector<std::size_t>& widths) const {
        const std::size_t n = cells.size();
        if (n == 0) return {};
        const std::size_t width = static_cast<std::size_t>(sh_.cols_);
        std::size_t best = 1;
        const std::size_t max_cols = std::min(n, std::max<std::size_t>(1, width / 3));
        for (std::size_t cols = max_cols; cols >= 1; --cols) {
            const std::size_t rows = (n + cols - 1) / cols;
            std::vector<std::size_t> colw(cols, 3);
            for (std::size_t f = 0; f < n; ++f) {
                const std::size_t c = f / rows;
                colw[c] = std::max(colw[c], widths[f] + (c == cols - 1 ? 0 : 2));
            }
            std::size_t total = 0;
            for (auto w : colw) total += w;
            if (total < width) {
                best = cols;
                break;
            }
            if (cols == 1) break;
        }
        const std::size_t rows = (n + best - 1) / best;
        std::vector<std::size_t> colw(best, 0);
        for (std::size_t f = 0; f < n; ++f) {
            const std::size_t c = f / rows;
            colw[c] = std::max(colw[c], widths[f] + (c == best - 1 ? 0 : 2));
        }
        std::string out;
        const bool tabs = s_.ls_tabs && !s_.color;
        for (std::size_t row = 0; row < rows; ++row) {
            std::size_t pos = 0;
            for (std::size_t c = 0; c < best; ++c) {
                const std::size_t f = c * rows + row;
                if (f >= n) break;
                out += cells[f];
                if (f + rows >= n) break;
                const std::size_t target = pos + colw[c];
                std::size_t at = pos + widths[f];
                if (tabs) {
                    while (target / 8 > (at + 1) / 8) {
                        out += '\t';
                        at = (at / 8 + 1) * 8;
                    }
                }
                out.append(target - at, ' ');
                pos = target;
            }
            out += "\n";
        }
        return out;
    }

    template <typename E>
    std::string long_rows(const std::vector<E>& ents, const std::vector<std::string>& cells, bool with_total,
                          bool hum) const {
        static const char* months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                       "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
        std::vector<std::vector<std::string>> rows;
        std::uint64_t blocks = 0;
        for (const auto& e : ents) {
            const std::uint64_t size = e.f.directory ? 4096 : e.f.content.size();
            blocks += (size + 4095) / 4096 * 4;
            std::time_t t = static_cast<std::time_t>(e.f.mtime);
            std::tm tm{};
            gmtime_r(&t, &tm);
            const bool recent = s_.now - e.f.mtime < 15778476 && e.f.mtime <= s_.now + 60;
            char when[16];
            if (recent) std::snprintf(when, sizeof when, "%02d:%02d", tm.tm_hour, tm.tm_min);
            else std::snprintf(when, sizeof when, "%d", tm.tm_year + 1900);
            rows.push_back({mode_string(e.f), e.f.directory ? "2" : "1", s_.username, s_.username,
                            hum ? human(size) : std::to_string(size), months[tm.tm_mon], std::to_string(tm.tm_mday),
                            when});
        }
        std::vector<std::size_t> w(8, 0);
        for (const auto& r : rows)
            for (std::size_t k = 0; k < 8; ++k) w[k] = std::max(w[k], r[k].size());
        std::string out;
        if (with_total) out += "total " + (hum ? human(blocks * 1024) : std::to_string(blocks)) + "\n";
        static const bool right[8] = {false, true, false, false, true, false, true, true};
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (std::size_t k = 0; k < 8; ++k) {
                const std::size_t pad = w[k] - rows[i][k].size();
                if (k) out += ' ';
                if (right[k]) out.append(pad, ' ');
                out += rows[i][k];
                if (!right[k]) out.append(pad, ' ');
            }
            out += " " + cells[i] + "\n";
        }
        return out;
    }

private:
    MockShell& sh_;
    const MockScript& s_;
    Millis now_;
};

// --- shell ------------------------------------------------------------------------

MockShell::MockShell(MockScript script, int cols, int rows) : script_(std::move(script)), cols_(cols), rows_(rows) {
    cwd_ = script_.home_dir();
}

std::string MockShell::prompt() const {
    std::string shown = cwd_;
    const std::string home = script_.home_dir();
    if (cwd_ == home) shown = "~";
    else if (starts_with(cwd_, home + "/")) shown = "~" + cwd_.substr(home.size());
    return script_.username + "@" + script_.hostname + ":" + shown + script_.terminator + " ";
}

void MockShell::resize(int cols, int rows) {
    cols_ = cols;
    rows_ = rows;
}

Bytes MockShell::start() { return crlf(script_.motd) + prompt(); }

std::optional<Millis> MockShell::next_deadline() const {
    if (mode_ == Mode::Busy) return busy_until_;
    return std::nullopt;
}

Bytes MockShell::tick(Millis now) {
    Bytes out;
    if (mode_ == Mode::Busy && now >= busy_until_) {
        mode_ = Mode::Edit;
        out += prompt();
        handle_byte_stream(out, now);
    }
    return out;
}

Bytes MockShell::feed(ByteView input, Millis now) {
    Bytes out = tick(now);
    input_.append(input);
    handle_byte_stream(out, now);
    return out;
}

void MockShell::handle_byte_stream(Bytes& out, Millis now) {
    while (!input_.empty() && !exited_) {
        if (mode_ == Mode::Busy || mode_ == Mode::Hang) {
            const auto intr = input_.find('\x03');
            if (intr == Bytes::npos) return;  // type-ahead waits for the command
            input_.erase(0, intr + 1);
            mode_ = Mode::Edit;
            out += "^C\r\n" + prompt();
            continue;
        }
        if (mode_ == Mode::Vimlike) {
            const auto q = input_.find('q');
            if (q == Bytes::npos) {
                input_.clear();
                return;
            }
            input_.erase(0, q + 1);
            mode_ = Mode::Edit;
            out += "\x1b[?1049l" + prompt();
            continue;
        }
        const auto b = static_cast<unsigned char>(input_[0]);
        std::size_t used = 1;
        bool tab = false;
        if (b == 0x1b) {
            if (input_.size() < 2) return;
            if (input_[1] == '[') {
                std::size_t k = 2;
                while (k < input_.size() && !(input_[k] >= 0x40 && input_[k] <= 0x7e)) ++k;
                if (k >= input_.size()) return;
                const std::string params = input_.substr(2, k - 2);
                const char fin = input_[k];
                used = k + 1;
                if (fin == 'A') key_history(out, -1);
                else if (fin == 'B') key_history(out, +1);
                else if (fin == 'C') key_right(out);
                else if (fin == 'D') key_left(out);
                else if (fin == 'H') key_home(out);
                else if (fin == 'F') key_end(out);
                else if (fin == '~' && params == "3") key_delete(out);
                else if (fin == '~' && (params == "1" || params == "7")) key_home(out);
                else if (fin == '~' && (params == "4" || params == "8")) key_end(out);
            } else if (input_[1] == 'O') {
                if (input_.size() < 3) return;
                used = 3;
                switch (input_[2]) {
                    case 'A': key_history(out, -1); break;
                    case 'B': key_history(out, +1); break;
                    case 'C': key_right(out); break;
                    case 'D': key_left(out); break;
                    case 'H': key_home(out); break;
                    case 'F': key_end(out); break;
                    default: break;
                }
            } else {
                used = 2;  // meta-prefixed key: ignored
            }
        } else if (b == 0x7f || b == 0x08) {
            key_backspace(out);
        } else if (b == '\r' || b == '\n') {
            input_.erase(0, 1);
            last_tab_ = false;
            key_enter(out, now);
            continue;
        } else if (b == '\t') {
            key_tab(out);
            tab = true;
        } else if (b == 0x03) {
            key_interrupt(out);
        } else if (b == 0x15) {
            key_kill_backward(out);
        } else if (b == 0x01) {
            key_home(out);
        } else if (b == 0x05) {
            key_end(out);
        } else if (b == 0x04) {
            if (line_.empty()) {
                exited_ = true;
                out += "logout\r\n";
            }
        } else if (b < 0x20) {
            // unbound control key
        } else if (b < 0x80) {
            key_printable(out, b);
        } else {
            const std::size_t n = (b >> 5) == 6 ? 2 : (b >> 4) == 14 ? 3 : (b >> 3) == 30 ? 4 : 0;
            if (n == 0) {
                used = 1;  // stray byte
            } else {
                if (input_.size() < n) return;
                used = n;
                const auto cps = from_utf8(std::string_view(input_).substr(0, n));
                if (cps.size() == 1) key_printable(out, cps[0]);
            }
        }
        input_.erase(0, used);
        last_tab_ = tab;
    }
}

void MockShell::redraw_tail(Bytes& out, std::size_t erased) {
    const std::u32string tail = line_.substr(cursor_);
    out += to_utf8(tail);
    if (erased) out += "\x1b[K";
    out.append(tail.size(), '\b');
}

void MockShell::key_printable(Bytes& out, char32_t ch) {
    line_.insert(line_.begin() + static_cast<std::ptrdiff_t>(cursor_), ch);
    ++cursor_;
    out += to_utf8(std::u32string(1, ch));
    if (cursor_ < line_.size()) redraw_tail(out, 0);
}

void MockShell::key_backspace(Bytes& out) {
    if (cursor_ == 0) return;
    line_.erase(--cursor_, 1);
    out += "\b";
    redraw_tail(out, 1);
}

void MockShell::key_delete(Bytes& out) {
    if (cursor_ >= line_.size()) return;
    line_.erase(cursor_, 1);
    redraw_tail(out, 1);
}

void MockShell::key_left(Bytes& out) {
    if (cursor_ == 0) return;
    --cursor_;
    out += "\b";
}

void MockShell::key_right(Bytes& out) {
    if (cursor_ >= line_.size()) return;
    out += to_utf8(line_.substr(cursor_, 1));
    ++cursor_;
}

void MockShell::key_home(Bytes& out) {
    out.append(cursor_, '\b');
    cursor_ = 0;
}

void MockShell::key_end(Bytes& out) {
    out += to_utf8(line_.substr(cursor_));
    cursor_ = line_.size();
}

void MockShell::key_kill_backward(Bytes& out) {
    if (cursor_ == 0) return;
    out.append(cursor_, '\b');
    line_.erase(0, cursor_);
    cursor_ = 0;
    redraw_tail(out, 1);
}

void MockShell::key_history(Bytes& out, int direction) {
    if (direction < 0) {
        if (history_pos_ == 0) {
            out += "\x07";
            return;
        }
        --history_pos_;
    } else {
        if (history_pos_ >= history_.size()) {
            out += "\x07";
            return;
        }
        ++history_pos_;
    }
    line_ = history_pos_ < history_.size() ? from_utf8(history_[history_pos_]) : std::u32string();
    cursor_ = line_.size();
    out += "\r\x1b[K" + prompt() + to_utf8(line_);
}

void MockShell::key_interrupt(Bytes& out) {
    out += "^C\r\n" + prompt();
    line_.clear();
    cursor_ = 0;
    history_pos_ = history_.size();
}

void MockShell::key_tab(Bytes& out) {
    const std::string left = to_utf8(line_.substr(0, cursor_));
    const auto space = left.find_last_of(' ');
    const std::string word = space == std::string::npos ? left : left.substr(space + 1);
    const bool first_word = left.find_first_not_of(' ') == std::string::npos ||
                            left.find_first_not_of(' ') >= (space == std::string::npos ? left.size() : space + 1);
    MockCommands cmds(*this, Millis(0));
    std::vector<std::string> cands;
    std::vector<bool> is_dir;
    std::string prefix = word;
    if (first_word) {
        static const std::vector<std::string> programs = {"cat", "cd", "clear", "echo", "exit", "grep", "hang",
                                                          "head", "history", "hostname", "id", "ls", "pwd", "sleep",
                                                          "sort", "tail", "touch", "uname", "uniq", "vimlike", "wc",
                                                          "whoami"};
        for (const auto& p : programs)
            if (starts_with(p, word)) {
                cands.push_back(p);
                is_dir.push_back(false);
            }
    } else {
        const auto slash = word.rfind('/');
        std::string dir = slash == std::string::npos ? std::string(".") : word.substr(0, slash + 1);
        prefix = slash == std::string::npos ? word : word.substr(slash + 1);
        const std::string dir_path = cmds.abs(dir.empty() ? "/" : dir);
        for (const auto& n : cmds.children(dir_path)) {
            if (!starts_with(n, prefix) || (n[0] == '.' && (prefix.empty() || prefix[0] != '.'))) continue;
            cands.push_back(n);
            is_dir.push_back(cmds.is_dir(dir_path == "/" ? "/" + n : dir_path + "/" + n));
        }
    }
    auto insert = [&](const std::string& text) {
        for (char32_t c : from_utf8(text)) key_printable(out, c);
    };
    auto escape = [](const std::string& s) {
        std::string o;
        for (char c : s) {
            if (std::string_view(" \t\\\"'`$><=;|&(){}[]*?!#~").find(c) != std::string_view::npos) o += '\\';
            o += c;
        }
        return o;
    };
    if (cands.empty()) {
        out += "\x07";
        return;
    }
    if (cands.size() == 1) {
        insert(escape(cands[0].substr(prefix.size())) + (is_dir[0] ? "/" : " "));
        return;
    }
    std::string common = cands[0];
    for (const auto& c : cands) {
        std::size_t k = 0;
        while (k < common.size() && k < c.size() && common[k] == c[k]) ++k;
        common.resize(k);
    }
    if (common.size() > prefix.size()) {
        insert(escape(common.substr(prefix.size())));
        return;
    }
    if (!last_tab_) {
        out += "\x07";
        return;
    }
    std::vector<std::string> shown;
    for (std::size_t i = 0; i < cands.size(); ++i) shown.push_back(cands[i] + (is_dir[i] ? "/" : ""));
    out += "\r\n" + render_completion_list(shown, cols_) + prompt() + to_utf8(line_);
    out.append(line_.size() - cursor_, '\b');
}

void MockShell::key_enter(Bytes& out, Millis now) {
    const std::string line = to_utf8(line_);
    line_.clear();
    cursor_ = 0;
    out += "\r\n";
    const bool record = !line.empty() && !(script_.history_ignore_space && line[0] == ' ');
    executed_.push_back(ExecutedCommand{line, record});
    if (record) history_.push_back(line);
    history_pos_ = history_.size();
    out += crlf(run_line(line, nullptr, now));
    if (exited_) return;
    if (mode_ == Mode::Edit) out += prompt();
}

Bytes MockShell::run_line(const std::string& line, int* status, Millis now) {
    MockCommands cmds(*this, now);
    const auto toks = lex(line);
    Bytes out;
    int last = 0;
    std::vector<std::vector<Tok>> stages(1);
    struct Redir {
        std::string op;
        std::string target;
    };
    std::vector<Redir> redirs;
    auto run_statement = [&]() {
        Bytes data;
        Bytes err;
        for (std::size_t s = 0; s < stages.size(); ++s) {
            Result r = cmds.run(cmds.expand(stages[s]), data);
            err += r.err;
            data = std::move(r.out);
            last = r.status;
        }
        for (const auto& rd : redirs) {
            if (rd.op == "2>") {
                if (rd.target == "/dev/null") err.clear();
                continue;
            }
            const std::string path = cmds.abs(rd.target);
            if (rd.target == "/dev/null") {
                data.clear();
                continue;
            }
            if (rd.op == ">>" && script_.files.count(path)) script_.files[path].content += data;
            else script_.add_file(path, data);
            data.clear();
        }
        out += err + data;
        stages.assign(1, {});
        redirs.clear();
    };
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const Tok& t = toks[i];
        if (!t.quoted && t.text == ";") {
            run_statement();
            if (mode_ != Mode::Edit || exited_) return out;
        } else if (!t.quoted && t.text == "|") {
            stages.emplace_back();
        } else if (!t.quoted && (t.text == ">" || t.text == ">>" || t.text == "2>" || t.text == "2>>")) {
            if (i + 1 < toks.size()) redirs.push_back({t.text == "2>>" ? "2>" : t.text, toks[++i].text});
        } else {
            stages.back().push_back(t);
        }
    }
    if (!toks.empty()) run_statement();
    if (status) *status = last;
    return out;
}

Bytes MockShell::exec(std::string_view line, int* status) {
    const bool saved = pty_;
    pty_ = false;
    executed_.push_back(ExecutedCommand{std::string(line), false});
    Bytes out = run_line(std::string(line), status, Millis(0));
    pty_ = saved;
    if (mode_ != Mode::Edit && mode_ != Mode::Vimlike) mode_ = Mode::Edit;
    return out;
}

// --- serving --------------------------------------------------------------------

void serve_mock_shell(MockShell& shell, DuplexChannel& channel) {
    std::mutex mu;
    std::condition_variable cv;
    Bytes pending;
    bool eof = false;
    std::optional<std::pair<int, int>> resize;
    channel.set_resize_handler([&](int c, int r) {
        std::lock_guard lock(mu);
        resize = std::make_pair(c, r);
        cv.notify_all();
    });
    std::thread reader([&] {
        while (true) {
            Bytes b = channel.read();
            std::lock_guard lock(mu);
            if (b.empty()) {
                eof = true;
                cv.notify_all();
                return;
            }
            pending += b;
            cv.notify_all();
        }
    });
    const auto t0 = std::chrono::steady_clock::now();
    auto now = [&] { return std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - t0); };
    channel.write(shell.start());
    while (!shell.exited()) {
        Bytes input;
        bool closed = false;
        {
            std::unique_lock lock(mu);
            auto ready = [&] { return !pending.empty() || eof || resize.has_value(); };
            if (auto dl = shell.next_deadline()) cv.wait_for(lock, std::max(Millis(0), *dl - now()), ready);
            else cv.wait(lock, ready);
            input.swap(pending);
            closed = eof;
            if (resize) {
                shell.resize(resize->first, resize->second);
                resize.reset();
            }
        }
        Bytes out = input.empty() ? shell.tick(now()) : shell.feed(input, now());
        if (!out.empty()) channel.write(out);
        if (closed) break;
    }
    if (auto* session = dynamic_cast<SessionChannel*>(&channel); session && shell.exited()) session->send_exit_status(0);
    channel.close_write();
    channel.set_resize_handler(nullptr);
    channel.close();
    reader.join();
}

}  // namespace sshdecoy
