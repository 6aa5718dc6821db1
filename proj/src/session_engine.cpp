#include "sshdecoy/session_engine.hpp"

#include <algorithm>
#include <set>

namespace sshdecoy {

const char* to_string(Phase phase) {
    switch (phase) {
        case Phase::PreAuth: return "PreAuth";
        case Phase::Bootstrapping: return "Bootstrapping";
        case Phase::AtPrompt: return "AtPrompt";
        case Phase::CollectingCommand: return "CollectingCommand";
        case Phase::AwaitingOutput: return "AwaitingOutput";
        case Phase::InteractiveProgram: return "InteractiveProgram";
        case Phase::TabCompleting: return "TabCompleting";
        case Phase::Closed: return "Closed";
    }
    return "?";
}

EngineSettings EngineSettings::from_config(const ProxyConfig& config) {
    EngineSettings s;
    if (config.prompt_override) {
        s.prompt = PromptPattern::custom(*config.prompt_override, config.prompt_terminators);
        s.prompt_fixed = true;
    } else {
        s.prompt = PromptPattern::generic(config.prompt_terminators);
    }
    s.history_mode = config.history_skip_mode;
    s.output_timeout = config.output_timeout;
    s.tab_settle = config.tab_settle;
    s.rules = std::make_shared<std::vector<DeceptionRule>>(config.rules);
    s.overlay = config.overlay ? config.overlay : std::make_shared<OverlaySnapshot>();
    s.collation = config.ls_collation;
    return s;
}

namespace {

constexpr std::size_t kTailLimit = 8192;
constexpr const char* kEndKillLine = "\x05\x15";  // end-of-line, then discard the line

// Leaving the alternate screen restores the line the program started from.
constexpr std::string_view kAltScreenExits[] = {"\x1b[?1049l", "\x1b[?1047l", "\x1b[?47l"};

std::size_t alt_screen_exit_end(ByteView data) {
    std::size_t end = 0;
    for (auto seq : kAltScreenExits) {
        const auto pos = data.rfind(seq);
        if (pos != ByteView::npos) end = std::max(end, pos + seq.size());
    }
    return end;
}

void keep_tail(Bytes& tail, ByteView data) {
    tail.append(data);
    const auto lf = tail.rfind('\n');
    if (lf != Bytes::npos) tail.erase(0, lf + 1);
    if (const auto alt = alt_screen_exit_end(tail)) tail.erase(0, alt);
    if (tail.size() > kTailLimit) tail.erase(0, tail.size() - kTailLimit);
}

std::string rtrim(std::string s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
    return s;
}

// Backslash-escapes characters the shell would otherwise interpret.
std::string completion_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (std::string_view(" \t\\\"'`$><=;|&(){}[]*?!#~").find(c) != std::string_view::npos) out += '\\';
        out += c;
    }
    return out;
}

std::string path_from_prompt(const std::string& path, const std::string& home) {
    if (path == "~") return home;
    if (starts_with(path, "~/")) return normalize_path(home + path.substr(1));
    if (!path.empty() && path[0] == '/') return normalize_path(path);
    return {};
}

std::string hostname_from_prompt(const std::string& text) {
    const auto at = text.find('@');
    if (at == std::string::npos) return {};
    const auto colon = text.find(':', at);
    if (colon == std::string::npos) return {};
    return text.substr(at + 1, colon - at - 1);
}

// Output of a hidden command: the lines after its echo, up to the prompt.
Bytes hidden_output(const Bytes& buf, const std::string& sent, std::size_t prompt_begin) {
    std::size_t start = buf.rfind(sent, prompt_begin);
    if (start == Bytes::npos) start = 0;
    const std::size_t nl = buf.find('\n', start);
    if (nl == Bytes::npos || nl + 1 > prompt_begin) return {};
    return buf.substr(nl + 1, prompt_begin - nl - 1);
}

std::string printable_text(ByteView raw) {
    std::string out;
    for (char c : strip_escapes(raw).text) {
        const auto u = static_cast<unsigned char>(c);
        if (u >= 0x20 && u != 0x7f) out += c;
    }
    return out;
}

}  // namespace

SessionEngine::SessionEngine(EngineSettings settings, SessionFacts facts, SessionEvents* events)
    : settings_(std::move(settings)), facts_(std::move(facts)), events_(events), prompt_(settings_.prompt) {
    home_ = "/home/" + facts_.username;
    cwd_ = home_;
}

Phase SessionEngine::phase() const {
    switch (mode_) {
        case Mode::Bootstrap: return Phase::Bootstrapping;
        case Mode::Edit: return line_.empty() && !tainted_ ? Phase::AtPrompt : Phase::CollectingCommand;
        case Mode::Passthrough: return Phase::InteractiveProgram;
        case Mode::Capture:
        case Mode::Swallow: return held_prompt_.empty() ? Phase::AwaitingOutput : Phase::Bootstrapping;
        case Mode::TabSettle:
        case Mode::EchoWait: return Phase::TabCompleting;
        case Mode::Closed: return Phase::Closed;
    }
    return Phase::Closed;
}

Bytes SessionEngine::take_to_client() {
    Bytes out;
    out.swap(to_client_);
    return out;
}

Bytes SessionEngine::take_to_host() {
    Bytes out;
    out.swap(to_host_);
    return out;
}

void SessionEngine::record(EventKind kind, std::string detail, Bytes evidence) {
    if (events_) events_->record(kind, std::move(detail), std::move(evidence));
}

HandlerContext SessionEngine::context(bool tty) const {
    HandlerContext ctx;
    ctx.overlay = settings_.overlay.get();
    ctx.username = facts_.username;
    ctx.hostname = hostname_;
    ctx.cwd = cwd_;
    ctx.home = home_;
    ctx.client_ip = facts_.client_ip;
    ctx.pty_cols = facts_.cols;
    ctx.tty = tty;
    ctx.collation_fallback = settings_.collation;
    ctx.start_time = settings_.start_time;
    ctx.now = std::chrono::system_clock::now();
    return ctx;
}

std::optional<Millis> SessionEngine::next_deadline() const {
    switch (mode_) {
        case Mode::Bootstrap:
            if (boot_deadline_ >= Millis(0)) return boot_deadline_;
            return std::nullopt;
        case Mode::Capture: return capture_->deadline;
        case Mode::Swallow: return swallow_->deadline;
        case Mode::TabSettle: return settle_deadline_;
        case Mode::EchoWait: return echo_deadline_;
        default: return std::nullopt;
    }
}

void SessionEngine::on_resize(int cols, int rows) {
    facts_.cols = cols;
    facts_.rows = rows;
}

void SessionEngine::on_host_closed() {
    if (mode_ == Mode::Capture && capture_ && capture_->kind == Capture::Kind::Command) to_client(capture_->buf);
    mode_ = Mode::Closed;
}

void SessionEngine::on_client_closed() { mode_ = Mode::Closed; }

// --- prompt tracking ---------------------------------------------------------

void SessionEngine::adopt_prompt(const PromptMatch& match, ByteView buffer) {
    last_prompt_raw_ = Bytes(buffer.substr(match.raw_begin));
    prompt_plain_ = strip_escapes(last_prompt_raw_).text;
    if (const auto cr = prompt_plain_.rfind('\r'); cr != std::string::npos) prompt_plain_.erase(0, cr + 1);
    if (match.path) {
        const std::string p = path_from_prompt(*match.path, home_);
        if (!p.empty()) cwd_ = p;
    }
    const std::string host = hostname_from_prompt(match.text);
    if (!host.empty()) hostname_ = host;
    tail_ = last_prompt_raw_;
    line_.clear();
    tainted_ = typeahead_;
    typeahead_ = false;
    renderer_.reset();
    renderer_.feed(last_prompt_raw_);
    history_pos_ = host_history_.size();
}

std::optional<std::string> SessionEngine::current_line() const {
    if (!tainted_) return line_.text();
    if (!renderer_.reliable()) return std::nullopt;
    const std::string shown = renderer_.text();
    if (!starts_with(shown, prompt_plain_)) return std::nullopt;
    return rtrim(shown.substr(prompt_plain_.size()));
}

bool SessionEngine::echo_caught_up() const {
    return renderer_.reliable() && rtrim(renderer_.text()) == rtrim(prompt_plain_ + line_.text());
}

void SessionEngine::enter_edit(Millis now) {
    mode_ = Mode::Edit;
    drain_keys(now);
}

void SessionEngine::enter_passthrough(Millis now) {
    (void)now;
    mode_ = Mode::Passthrough;
    if (!keys_.empty()) {
        Bytes sent;
        for (const auto& k : keys_) sent += k.raw;
        keys_.clear();
        passthrough_keys(sent);
    }
}

void SessionEngine::passthrough_keys(ByteView keys) {
    to_host(keys);
    // An interrupt as the last key leaves the shell with an empty line.
    if (!keys.empty()) typeahead_ = keys.back() != '\x03';
}

// --- host side ---------------------------------------------------------------

void SessionEngine::on_host_data(ByteView data, Millis now) {
    switch (mode_) {
        case Mode::Closed: return;
        case Mode::Bootstrap: {
            boot_buf_.append(data);
            if (boot_deadline_ < Millis(0)) boot_deadline_ = now + settings_.output_timeout;
            if (auto m = ends_with_prompt(boot_buf_, prompt_)) bootstrap_prompt(*m, now);
            return;
        }
        case Mode::Edit: {
            to_client(data);
            renderer_.feed(data);
            const bool new_line = data.find('\n') != ByteView::npos || alt_screen_exit_end(data) != 0;
            keep_tail(tail_, data);
            if (new_line) {
                if (auto m = ends_with_prompt(tail_, prompt_)) {
                    const Bytes tail = tail_;
                    adopt_prompt(*m, tail);
                }
            }
            return;
        }
        case Mode::Passthrough: {
            to_client(data);
            keep_tail(tail_, data);
            if (auto m = ends_with_prompt(tail_, prompt_)) {
                const Bytes tail = tail_;
                adopt_prompt(*m, tail);
                enter_edit(now);
            }
            return;
        }
        case Mode::EchoWait: {
            to_client(data);
            renderer_.feed(data);
            keep_tail(tail_, data);
            if (echo_caught_up()) {
                auto done = std::move(echo_done_);
                done(now);
            }
            return;
        }
        case Mode::TabSettle: {
            to_client(data);
            renderer_.feed(data);
            settle_buf_.append(data);
            keep_tail(tail_, data);
            settle_deadline_ = now + settings_.tab_settle;
            return;
        }
        case Mode::Swallow: {
            swallow_->buf.append(data);
            if (swallow_->until) {
                if (swallow_->until(swallow_->buf)) {
                    auto done = std::move(swallow_->done);
                    swallow_.reset();
                    done(now);
                }
            } else {
                swallow_->deadline = now + settings_.tab_settle;
            }
            return;
        }
        case Mode::Capture: {
            Capture& c = *capture_;
            c.buf.append(data);
            if (c.kind == Capture::Kind::Command && !c.past_echo) {
                const auto lf = c.buf.find('\n');
                if (lf == Bytes::npos) return;
                to_client(ByteView(c.buf).substr(0, lf + 1));
                c.buf.erase(0, lf + 1);
                c.past_echo = true;
            }
            auto m = ends_with_prompt(c.buf, prompt_);
            if (!m) return;
            Bytes buf = std::move(c.buf);
            auto done = std::move(c.done);
            const Capture::Kind kind = c.kind;
            const std::string sent = c.sent;
            capture_.reset();
            Bytes output = kind == Capture::Kind::Hidden ? hidden_output(buf, sent, m->raw_begin)
                                                         : buf.substr(0, m->raw_begin);
            adopt_prompt(*m, buf);
            done(std::move(output), now);
            return;
        }
    }
}

void SessionEngine::bootstrap_prompt(const PromptMatch& match, Millis now) {
    to_client(ByteView(boot_buf_).substr(0, match.raw_begin));  // MOTD
    held_prompt_ = boot_buf_.substr(match.raw_begin);
    if (!settings_.prompt_fixed) {
        try {
            prompt_ = learn_prompt(held_prompt_, facts_.username, settings_.prompt.terminators());
        } catch (const NoPromptFound&) {
            record(EventKind::Degraded, "prompt not learnable", held_prompt_);
        }
    }
    const Bytes buf = std::move(boot_buf_);
    boot_buf_.clear();
    adopt_prompt(match, buf);
    run_hidden("pwd", "", [this](std::optional<Bytes> out, Millis at) {
        std::string dir = out ? from_crlf(*out) : std::string();
        while (!dir.empty() && (dir.back() == '\n' || dir.back() == '\r')) dir.pop_back();
        if (!dir.empty() && dir[0] == '/' && dir.find('\n') == std::string::npos) {
            home_ = normalize_path(dir);
            cwd_ = home_;
        } else {
            home_ = "/home/" + facts_.username;
            cwd_ = home_;
            record(EventKind::Degraded, "pwd output unparsable", out.value_or(Bytes()));
        }
        to_client(held_prompt_);
        held_prompt_.clear();
        enter_edit(at);
    }, now);
}

void SessionEngine::run_hidden(const std::string& command, const std::string& prefix,
                               std::function<void(std::optional<Bytes>, Millis)> done, Millis now) {
    const bool space = settings_.history_mode == HistorySkipMode::SpacePrefix;
    const std::string sent = (space ? " " : "") + command;
    hidden_log_.push_back(sent);
    if (!space) {
        host_history_.push_back({sent, true});
        history_pos_ = host_history_.size();
    }
    to_host(prefix + sent + "\r");
    Capture c;
    c.kind = Capture::Kind::Hidden;
    c.sent = sent;
    c.deadline = now + settings_.output_timeout;
    c.done = std::move(done);
    capture_ = std::move(c);
    mode_ = Mode::Capture;
}

void SessionEngine::start_swallow(std::function<bool(const Bytes&)> until, Millis timeout,
                                  std::function<void(Millis)> done, Millis now) {
    Swallow s;
    s.until = std::move(until);
    s.deadline = now + timeout;
    s.done = std::move(done);
    swallow_ = std::move(s);
    mode_ = Mode::Swallow;
}

void SessionEngine::on_tick(Millis now) {
    switch (mode_) {
        case Mode::Bootstrap:
            if (boot_deadline_ >= Millis(0) && now >= boot_deadline_) {
                record(EventKind::Degraded, "no prompt within output timeout", boot_buf_);
                to_client(boot_buf_);
                keep_tail(tail_, boot_buf_);
                boot_buf_.clear();
                enter_passthrough(now);
            }
            return;
        case Mode::Capture: {
            if (now < capture_->deadline) return;
            Capture c = std::move(*capture_);
            capture_.reset();
            record(EventKind::Degraded, c.kind == Capture::Kind::Hidden ? "hidden command timed out: " + c.sent
                                                                        : "no prompt after command output",
                   c.buf);
            if (c.kind == Capture::Kind::Hidden) {
                // Interrupt it and discard everything up to the next prompt.
                to_host("\x03");
                auto done = std::move(c.done);
                start_swallow([this](const Bytes& b) { return ends_with_prompt(b, prompt_).has_value(); },
                              settings_.output_timeout, [done](Millis at) { done(std::nullopt, at); }, now);
                return;
            }
            to_client(c.buf);
            keep_tail(tail_, c.buf);
            enter_passthrough(now);
            return;
        }
        case Mode::Swallow: {
            if (now < swallow_->deadline) return;
            Swallow s = std::move(*swallow_);
            swallow_.reset();
            if (s.until) record(EventKind::Degraded, "expected host output missing", s.buf);
            s.done(now);
            return;
        }
        case Mode::EchoWait:
            if (now >= echo_deadline_) {
                auto done = std::move(echo_done_);
                done(now);
            }
            return;
        case Mode::TabSettle:
            if (now >= settle_deadline_) {
                finish_settle();
                enter_edit(now);
            }
            return;
        default: return;
    }
}

// --- client side -------------------------------------------------------------

void SessionEngine::on_client_data(ByteView data, Millis now) {
    if (mode_ == Mode::Closed) return;
    if (mode_ == Mode::Passthrough && keys_.empty() && tokenizer_.pending().empty()) {
        passthrough_keys(data);
        return;
    }
    for (auto& ev : tokenizer_.feed(data)) keys_.push_back(std::move(ev));
    if (mode_ == Mode::Passthrough) {
        enter_passthrough(now);
        return;
    }
    if (mode_ == Mode::Capture && capture_->kind == Capture::Kind::Command) {
        // An interrupt reaches the running command; keys typed before it are dropped.
        auto it = std::find_if(keys_.rbegin(), keys_.rend(), [](const KeyEvent& k) { return k.kind == KeyKind::Interrupt; });
        if (it != keys_.rend()) {
            keys_.erase(keys_.begin(), it.base());
            to_host("\x03");
            Capture c = std::move(*capture_);
            capture_.reset();
            to_client(c.buf);
            keep_tail(tail_, c.buf);
            enter_passthrough(now);
        }
        return;
    }
    if (mode_ == Mode::Edit) drain_keys(now);
}

void SessionEngine::drain_keys(Millis now) {
    while (mode_ == Mode::Edit && !keys_.empty()) {
        KeyEvent ev = std::move(keys_.front());
        keys_.pop_front();
        handle_key(ev, now);
    }
    if (mode_ == Mode::Passthrough) enter_passthrough(now);
}

void SessionEngine::handle_key(const KeyEvent& ev, Millis now) {
    const bool was_tab = last_tab_;
    last_tab_ = false;
    switch (ev.kind) {
        case KeyKind::Printable:
        case KeyKind::Backspace:
        case KeyKind::Delete:
        case KeyKind::CursorLeft:
        case KeyKind::CursorRight:
        case KeyKind::Home:
        case KeyKind::End:
            line_.apply(ev);
            to_host(ev.raw);
            return;
        case KeyKind::Other:
            tainted_ = true;
            to_host(ev.raw);
            return;
        case KeyKind::Up:
        case KeyKind::Down:
            if (settings_.history_mode == HistorySkipMode::KeyOffset) {
                history_key(ev, ev.kind == KeyKind::Up, now);
            } else {
                tainted_ = true;
                to_host(ev.raw);
            }
            return;
        case KeyKind::Interrupt:
            to_host(ev.raw);
            line_.clear();
            tainted_ = false;
            history_pos_ = host_history_.size();
            return;
        case KeyKind::Tab:
            last_tab_ = was_tab;
            tab(ev, now);
            last_tab_ = true;
            return;
        case KeyKind::Enter: commit(ev, now); return;
    }
}

// --- commands ----------------------------------------------------------------

void SessionEngine::commit(const KeyEvent& ev, Millis now) {
    const auto text = current_line();
    if (settings_.history_mode == HistorySkipMode::KeyOffset) {
        const std::string entry = text.value_or(std::string());
        if (!rtrim(entry).empty()) host_history_.push_back({entry, false});
        history_pos_ = host_history_.size();
    }
    if (!text) {
        to_host(ev.raw);
        mode_ = Mode::Passthrough;
        return;
    }
    committed_.push_back(*text);
    auto cmd = std::make_shared<ParsedCommand>(parse_command(*text));
    auto claim = std::make_shared<Claim>(route(*cmd, *settings_.rules, context(true)));
    for (const auto& e : claim->events) record(e.kind, e.detail, e.evidence);
    claim->events.clear();
    if (!claim->claimed()) {
        to_host(ev.raw);
        mode_ = Mode::Passthrough;
        return;
    }
    Capture c;
    c.deadline = now + settings_.output_timeout;
    if (!claim->send_to_host) {
        // The line is discarded on the host instead of executed.
        to_host("\x03");
        c.kind = Capture::Kind::Block;
        c.past_echo = true;
        c.done = [this, claim, cmd](std::optional<Bytes> out, Millis at) {
            // Keys echoed in the same burst as the interrupt still belong on screen.
            if (out) {
                const auto caret = out->rfind("^C");
                if (caret != Bytes::npos) to_client(ByteView(*out).substr(0, caret));
            }
            finish_claim(*claim, *cmd, {}, {}, at);
        };
    } else {
        to_host(ev.raw);
        c.kind = Capture::Kind::Command;
        c.done = [this, claim, cmd](std::optional<Bytes> out, Millis at) {
            run_probes(claim, cmd, out.value_or(Bytes()), std::make_shared<std::vector<Bytes>>(), at);
        };
    }
    capture_ = std::move(c);
    mode_ = Mode::Capture;
}

void SessionEngine::run_probes(std::shared_ptr<Claim> claim, std::shared_ptr<ParsedCommand> cmd, Bytes output,
                               std::shared_ptr<std::vector<Bytes>> probes, Millis now) {
    if (probes->size() >= claim->probes.size()) {
        finish_claim(*claim, *cmd, output, *probes, now);
        return;
    }
    const std::string probe = claim->probes[probes->size()];
    run_hidden(probe, "", [this, claim, cmd, output, probes](std::optional<Bytes> out, Millis at) {
        if (!out) {
            // Without the probe the rewrite is not possible; show the host's own output.
            to_client(output + last_prompt_raw_);
            enter_edit(at);
            return;
        }
        probes->push_back(std::move(*out));
        run_probes(claim, cmd, output, probes, at);
    }, now);
}

void SessionEngine::finish_claim(const Claim& claim, const ParsedCommand& cmd, const Bytes& output,
                                 const std::vector<Bytes>& probes, Millis now) {
    const HandlerOutcome outcome = run_handler(claim, cmd, output, probes, context(true));
    to_client(outcome.result.concat() + last_prompt_raw_);
    for (const auto& e : outcome.events) record(e.kind, e.detail, e.evidence);
    enter_edit(now);
}

// --- TAB ---------------------------------------------------------------------

void SessionEngine::tab(const KeyEvent& ev, Millis now) {
    const bool second = last_tab_;
    const std::string left = line_.left_text();
    const auto space = left.find_last_of(' ');
    const std::string word = space == std::string::npos ? left : left.substr(space + 1);
    const bool first_word = left.substr(0, space == std::string::npos ? 0 : space).find_first_not_of(' ') ==
                            std::string::npos;
    const bool plain = word.find_first_of("'\"\\$`*?[") == std::string::npos;
    std::string dir_part;
    std::string fragment = word;
    if (const auto slash = word.rfind('/'); slash != std::string::npos) {
        dir_part = word.substr(0, slash + 1);
        fragment = word.substr(slash + 1);
    }
    std::string dir;
    if (plain && !(dir_part.size() > 1 && dir_part[0] == '~' && dir_part[1] != '/'))
        dir = resolve(dir_part.empty() ? "." : dir_part, cwd_, home_);
    bool involved = false;
    if (!tainted_ && !first_word && line_.right().empty() && plain && !dir.empty() && dir[0] == '/') {
        const OverlaySnapshot& overlay = *settings_.overlay;
        involved = !overlay.complete(dir, fragment).empty();
        for (const auto& h : overlay.list_dir(dir).hides) involved = involved || starts_with(h, fragment);
    }
    if (!involved) {
        to_host(ev.raw);
        settle_buf_.clear();
        settle_deadline_ = now + settings_.tab_settle;
        mode_ = Mode::TabSettle;
        return;
    }

    const std::string line = line_.text();
    // Let the echo of keys already sent reach the client before the line is cleared.
    echo_done_ = [this, dir, fragment, line, second](Millis start) {
    run_hidden("command ls -1ap -- " + shell_quote(dir), kEndKillLine,
               [this, dir, fragment, line, second](std::optional<Bytes> out, Millis at) {
        const OverlaySnapshot& overlay = *settings_.overlay;
        const DirListing listing = overlay.list_dir(dir);
        const bool dots = !fragment.empty() && fragment[0] == '.';
        std::set<std::string> cands;
        const std::string plain_out = out ? from_crlf(strip_escapes(*out).text) : std::string();
        const bool failed = !out || plain_out.find("ls: ") != std::string::npos;
        std::size_t pos = 0;
        while (!failed && pos < plain_out.size()) {
            auto nl = plain_out.find('\n', pos);
            if (nl == std::string::npos) nl = plain_out.size();
            std::string name = plain_out.substr(pos, nl - pos);
            pos = nl + 1;
            if (name.empty() || name == "./" || name == "../") continue;
            const std::string bare = ends_with(name, "/") ? name.substr(0, name.size() - 1) : name;
            if (listing.hides.count(bare) || !starts_with(bare, fragment)) continue;
            if (bare[0] == '.' && !dots) continue;
            cands.insert(name);
        }
        for (const auto& n : overlay.complete(dir, fragment)) {
            if (n[0] == '.' && !dots) continue;
            cands.insert(n);
        }
        auto resolve_completion = [this, cands, fragment, line, second](Millis t) {
            const std::vector<std::string> names(cands.begin(), cands.end());
            if (names.empty()) {
                to_client("\x07");
            } else if (names.size() == 1) {
                std::string ins = completion_escape(names[0].substr(fragment.size()));
                if (!ends_with(names[0], "/")) ins += " ";
                to_host(ins);
                line_.insert(utf8_decode(ins));
            } else {
                std::string common = names[0];
                for (const auto& n : names) {
                    std::size_t k = 0;
                    while (k < common.size() && k < n.size() && common[k] == n[k]) ++k;
                    common.resize(k);
                }
                if (common.size() > fragment.size()) {
                    const std::string ins = completion_escape(common.substr(fragment.size()));
                    to_host(ins);
                    line_.insert(utf8_decode(ins));
                } else if (second) {
                    to_client("\r\n" + render_completion_list(names, facts_.cols) + last_prompt_raw_ + line);
                    renderer_.reset();
                    renderer_.feed(last_prompt_raw_ + line);
                } else {
                    to_client("\x07");
                }
            }
            enter_edit(t);
        };
        // The hidden command cleared the host's line; type it again unseen.
        const Bytes prompt_raw = last_prompt_raw_;
        const std::string want = printable_text(line);
        line_ = LineBuffer::with_cursor(line, utf8_decode(line).size());
        tail_ = prompt_raw;
        renderer_.reset();
        renderer_.feed(prompt_raw + line);
        to_host(line);
        start_swallow([want](const Bytes& b) { return ends_with(printable_text(b), want); }, settings_.output_timeout,
                      resolve_completion, at);
    }, start);
    };
    if (echo_caught_up()) {
        auto done = std::move(echo_done_);
        done(now);
    } else {
        echo_deadline_ = now + settings_.tab_settle;
        mode_ = Mode::EchoWait;
    }
}

void SessionEngine::finish_settle() {
    const Bytes& b = settle_buf_;
    bool only_printable = true;
    Bytes typed;
    for (char c : b) {
        const auto u = static_cast<unsigned char>(c);
        if (u == 0x07) continue;
        if (u < 0x20 || u == 0x7f) {
            only_printable = false;
            break;
        }
        typed += c;
    }
    if (only_printable) {
        line_.insert(utf8_decode(typed));
    } else if (b.find('\n') != Bytes::npos) {
        const std::string last = strip_escapes(ByteView(b).substr(b.rfind('\n') + 1)).text;
        if (starts_with(last, prompt_plain_) && last.find('\r') == std::string::npos) {
            const std::string text = last.substr(prompt_plain_.size());
            line_ = LineBuffer::with_cursor(text, utf8_decode(text).size());
            tainted_ = false;
            renderer_.reset();
            renderer_.feed(last_prompt_raw_ + text);
        } else {
            tainted_ = true;
        }
    } else {
        tainted_ = true;
    }
    settle_buf_.clear();
}

// --- history -----------------------------------------------------------------

void SessionEngine::history_key(const KeyEvent& ev, bool up, Millis now) {
    std::optional<std::size_t> target;
    if (up) {
        for (std::size_t j = history_pos_; j-- > 0;)
            if (!host_history_[j].hidden) {
                target = j;
                break;
            }
        if (!target) {
            // Only hidden entries (or none) remain above.
            to_client("\x07");
            return;
        }
    } else {
        if (history_pos_ >= host_history_.size()) {
            to_host(ev.raw);
            tainted_ = true;
            return;
        }
        std::size_t j = history_pos_ + 1;
        while (j < host_history_.size() && host_history_[j].hidden) ++j;
        target = j;
    }
    const std::size_t steps = up ? history_pos_ - *target : *target - history_pos_;
    for (std::size_t i = 0; i < steps; ++i) to_host(ev.raw);
    history_pos_ = *target;
    const std::string entry = *target < host_history_.size() ? host_history_[*target].text : std::string();
    start_swallow({}, settings_.tab_settle, [this, entry](Millis at) {
        to_client("\r" + last_prompt_raw_ + entry + "\x1b[K");
        line_ = LineBuffer::with_cursor(entry, utf8_decode(entry).size());
        tainted_ = false;
        renderer_.reset();
        renderer_.feed(last_prompt_raw_ + entry);
        enter_edit(at);
    }, now);
}

// --- exec --------------------------------------------------------------------

std::optional<HostExecResult> mediate_exec(const std::string& command, const EngineSettings& settings,
                                           const SessionFacts& facts, SessionEvents* events, const HostExec& host) {
    if (settings.overlay->empty() && settings.rules->empty()) return std::nullopt;
    auto rec = [&](const HandlerEvent& e) {
        if (events) events->record(e.kind, e.detail, e.evidence);
    };
    HandlerContext ctx;
    ctx.overlay = settings.overlay.get();
    ctx.username = facts.username;
    ctx.client_ip = facts.client_ip;
    ctx.tty = false;
    ctx.collation_fallback = settings.collation;
    ctx.start_time = settings.start_time;
    ctx.now = std::chrono::system_clock::now();
    ctx.home = "/home/" + facts.username;
    const HostExecResult pwd = host("pwd");
    if (pwd.status == 0 && !pwd.out.empty() && pwd.out[0] == '/') {
        std::string dir = pwd.out;
        while (!dir.empty() && dir.back() == '\n') dir.pop_back();
        ctx.home = normalize_path(dir);
    }
    ctx.cwd = ctx.home;
    const HostExecResult hn = host("hostname");
    ctx.hostname = hn.out.substr(0, hn.out.find('\n'));

    const ParsedCommand cmd = parse_command(command);
    const Claim claim = route(cmd, *settings.rules, ctx);
    for (const auto& e : claim.events) rec(e);
    if (!claim.claimed()) return std::nullopt;
    if (!claim.send_to_host) {
        const HandlerOutcome o = run_handler(claim, cmd, {}, {}, ctx);
        for (const auto& e : o.events) rec(e);
        return HostExecResult{{}, o.result.modified_response + "\n", 1};
    }
    // Without a terminal stderr is separate; merge it the way a terminal would.
    const bool merge = claim.kind != HandlerKind::Rule;
    const HostExecResult real = host(merge ? command + " 2>&1" : command);
    std::vector<Bytes> probes;
    for (const auto& p : claim.probes) probes.push_back(host(p + " 2>&1").out);
    const HandlerOutcome o = run_handler(claim, cmd, real.out, probes, ctx);
    for (const auto& e : o.events) rec(e);
    HostExecResult out{o.result.concat(), merge ? Bytes() : real.err, real.status};
    if (merge && out.out != real.out)
        out.status = out.out.find(": No such file or directory") != Bytes::npos ? 1 : 0;
    return out;
}

}  // namespace sshdecoy
