#include "sshdecoy/command_handlers.hpp"

#include <algorithm>
#include <set>

#include "sshdecoy/terminal_codec.hpp"
#include "sshdecoy/text_filters.hpp"

namespace sshdecoy {

const char* to_string(RuleAction action) {
    switch (action) {
        case RuleAction::ReplaceOutput: return "replace_output";
        case RuleAction::OverlayFs: return "overlay";
        case RuleAction::Block: return "block";
        case RuleAction::AlertOnly: return "alert";
    }
    return "?";
}

std::optional<RuleAction> rule_action_from_string(std::string_view name) {
    for (auto a : {RuleAction::ReplaceOutput, RuleAction::OverlayFs, RuleAction::Block, RuleAction::AlertOnly})
        if (name == to_string(a)) return a;
    return std::nullopt;
}

const char* to_string(HandlerKind kind) {
    switch (kind) {
        case HandlerKind::Unclaimed: return "unclaimed";
        case HandlerKind::Rule: return "rule";
        case HandlerKind::Ls: return "ls";
        case HandlerKind::Cat: return "cat";
        case HandlerKind::Head: return "head";
        case HandlerKind::Tail: return "tail";
        case HandlerKind::Uname: return "uname";
        case HandlerKind::Pipeline: return "pipeline";
    }
    return "?";
}

namespace {

std::string joined_args(const Stage& stage) {
    std::string out;
    for (std::size_t i = 1; i < stage.words.size(); ++i) {
        if (i > 1) out += ' ';
        out += stage.words[i].text;
    }
    return out;
}

bool stage_matches(const DeceptionRule& rule, const Stage& stage) {
    if (stage.program() != rule.program) return false;
    if (!rule.args_regex) return true;
    return std::regex_search(joined_args(stage), *rule.args_regex);
}

}  // namespace

bool DeceptionRule::matches(const ParsedCommand& cmd) const {
    if (cmd.pipeline.empty()) return false;
    // Alerting and blocking look at every stage, even of lines the handlers
    // would not rewrite; output replacement only applies to simple commands.
    if (action == RuleAction::Block || action == RuleAction::AlertOnly) {
        return std::any_of(cmd.pipeline.begin(), cmd.pipeline.end(),
                           [&](const Stage& s) { return stage_matches(*this, s); });
    }
    return !cmd.complex && stage_matches(*this, cmd.first());
}

const std::vector<std::string>& template_variables() {
    static const std::vector<std::string> vars = {"username", "host", "cwd", "home", "client_ip"};
    return vars;
}

namespace {

const std::regex& template_regex() {
    static const std::regex re(R"(\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\})");
    return re;
}

std::string template_value(const std::string& name, const HandlerContext& ctx) {
    if (name == "username") return ctx.username;
    if (name == "host") return ctx.hostname;
    if (name == "cwd") return ctx.cwd;
    if (name == "home") return ctx.home;
    if (name == "client_ip") return ctx.client_ip;
    return {};
}

}  // namespace

std::vector<std::string> unknown_template_variables(std::string_view text) {
    std::vector<std::string> unknown;
    const std::string s(text);
    const auto& known = template_variables();
    for (auto it = std::sregex_iterator(s.begin(), s.end(), template_regex()); it != std::sregex_iterator(); ++it) {
        const std::string name = (*it)[1].str();
        if (std::find(known.begin(), known.end(), name) == known.end()) unknown.push_back(name);
    }
    return unknown;
}

std::string render_template(std::string_view text, const HandlerContext& ctx) {
    const std::string s(text);
    std::string out;
    std::size_t last = 0;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), template_regex()); it != std::sregex_iterator(); ++it) {
        out.append(s, last, static_cast<std::size_t>(it->position()) - last);
        out += template_value((*it)[1].str(), ctx);
        last = static_cast<std::size_t>(it->position() + it->length());
    }
    out.append(s, last, std::string::npos);
    return out;
}

namespace {

HandlerOutcome identity(ByteView true_output) {
    HandlerOutcome o;
    o.result.modified_response = Bytes(true_output);
    return o;
}

Bytes emit(ByteView lf_text, const HandlerContext& ctx) { return ctx.tty ? to_crlf(lf_text) : Bytes(lf_text); }

const DecoyEntry* lookup_word(const Word& w, const HandlerContext& ctx) {
    if (!ctx.overlay || !w.literal()) return nullptr;
    return ctx.overlay->lookup(resolve(w.text, ctx.cwd, ctx.home));
}

bool is_option(const std::string& word) { return word.size() > 1 && word[0] == '-'; }

// cat operands after an optional "--"; nullopt when options are present.
std::optional<std::vector<const Word*>> cat_operands(const Stage& stage) {
    std::vector<const Word*> ops;
    bool options_done = false;
    for (std::size_t i = 1; i < stage.words.size(); ++i) {
        const Word& w = stage.words[i];
        if (!options_done && w.text == "--") {
            options_done = true;
            continue;
        }
        if (!options_done && is_option(w.text)) return std::nullopt;
        if (w.text == "-") return std::nullopt;
        ops.push_back(&w);
    }
    return ops;
}

struct CountedOperands {
    LineCount count;
    std::vector<std::string> option_words;  // requoted, for probes
    std::vector<const Word*> operands;
};

std::optional<CountedOperands> counted_operands(const Stage& stage, bool tail) {
    const auto argv = stage.argv();
    std::size_t idx = 0;
    auto lc = parse_line_count(argv, idx, tail);
    if (!lc) return std::nullopt;
    CountedOperands out;
    out.count = *lc;
    for (std::size_t i = 1; i < idx; ++i) out.option_words.push_back(requote(stage.words[i]));
    for (std::size_t i = idx; i < stage.words.size(); ++i) {
        const Word& w = stage.words[i];
        if (is_option(w.text) || w.text == "-") return std::nullopt;
        out.operands.push_back(&w);
    }
    return out;
}

bool all_literal(const std::vector<const Word*>& words) {
    return std::all_of(words.begin(), words.end(), [](const Word* w) { return w->literal(); });
}

HandlerEvent decoy_access(const std::string& vpath, const ParsedCommand& cmd) {
    return HandlerEvent{EventKind::DecoyAccess, vpath, Bytes(cmd.raw)};
}

// DecoyAccess events for visible decoys a command names without a handler
// serving them (the host answers from the real filesystem).
std::vector<HandlerEvent> unserved_decoy_events(const ParsedCommand& cmd, const HandlerContext& ctx) {
    std::vector<HandlerEvent> events;
    std::set<std::string> seen;
    auto consider = [&](const Word& w) {
        const DecoyEntry* e = lookup_word(w, ctx);
        if (e && e->mode != DecoyMode::Hide && seen.insert(e->vpath).second)
            events.push_back(decoy_access(e->vpath, cmd));
    };
    for (const auto& stage : cmd.pipeline) {
        for (std::size_t i = 1; i < stage.words.size(); ++i) consider(stage.words[i]);
        for (const auto& r : stage.redirections) consider(r.target);
    }
    return events;
}

bool overlay_involved(const ParsedCommand& cmd, const HandlerContext& ctx) {
    for (const auto& stage : cmd.pipeline) {
        for (std::size_t i = 1; i < stage.words.size(); ++i)
            if (lookup_word(stage.words[i], ctx)) return true;
        for (const auto& r : stage.redirections)
            if (lookup_word(r.target, ctx)) return true;
    }
    return false;
}

Claim unclaimed(std::vector<HandlerEvent> events) {
    Claim c;
    c.events = std::move(events);
    return c;
}

std::optional<std::vector<const Word*>> stage_one_operands(const Stage& stage) {
    const std::string prog = stage.program();
    if (prog == "cat") return cat_operands(stage);
    if (prog == "head" || prog == "tail") {
        auto c = counted_operands(stage, prog == "tail");
        if (!c) return std::nullopt;
        return c->operands;
    }
    return std::nullopt;
}

bool pipeline_supported(const ParsedCommand& cmd, const HandlerContext& ctx) {
    for (const auto& stage : cmd.pipeline)
        if (!stage.redirections.empty()) return false;
    auto ops = stage_one_operands(cmd.first());
    if (!ops || ops->empty() || !all_literal(*ops)) return false;
    for (const Word* w : *ops)
        if (!lookup_word(*w, ctx)) return false;  // real inputs mixed in
    for (std::size_t s = 1; s < cmd.pipeline.size(); ++s) {
        const Stage& stage = cmd.pipeline[s];
        for (const auto& w : stage.words)
            if (!w.literal()) return false;
        if (!make_filter(stage.argv())) return false;
    }
    return true;
}

Claim route_pipeline(const ParsedCommand& cmd, const HandlerContext& ctx) {
    if (!overlay_involved(cmd, ctx)) return {};
    if (pipeline_supported(cmd, ctx)) {
        Claim c;
        c.kind = HandlerKind::Pipeline;
        return c;
    }
    auto events = unserved_decoy_events(cmd, ctx);
    events.insert(events.begin(), HandlerEvent{EventKind::PipelineEscape, cmd.raw, Bytes(cmd.raw)});
    return unclaimed(std::move(events));
}

std::optional<std::string> uname_fields(const std::vector<std::string>& argv) {
    static const std::vector<std::pair<std::string, char>> long_opts = {
        {"--all", 'a'},           {"--kernel-name", 's'},    {"--nodename", 'n'},
        {"--kernel-release", 'r'}, {"--kernel-version", 'v'}, {"--machine", 'm'},
        {"--processor", 'p'},     {"--hardware-platform", 'i'}, {"--operating-system", 'o'}};
    std::string flags;
    for (std::size_t i = 1; i < argv.size(); ++i) {
        const std::string& a = argv[i];
        if (starts_with(a, "--")) {
            auto it = std::find_if(long_opts.begin(), long_opts.end(), [&](const auto& p) { return p.first == a; });
            if (it == long_opts.end()) return std::nullopt;
            flags += it->second;
        } else if (a.size() > 1 && a[0] == '-') {
            for (std::size_t k = 1; k < a.size(); ++k) {
                if (std::string_view("asnrvmpio").find(a[k]) == std::string_view::npos) return std::nullopt;
                flags += a[k];
            }
        } else {
            return std::nullopt;
        }
    }
    return flags.empty() ? std::string("s") : flags;
}

std::optional<KernelIdentity> overlay_kernel(const HandlerContext& ctx) {
    if (!ctx.overlay) return std::nullopt;
    const DecoyEntry* e = ctx.overlay->lookup("/proc/version");
    if (!e || e->mode == DecoyMode::Hide) return std::nullopt;
    return parse_proc_version(e->content);
}

constexpr const char* kUnameProbe = "uname -s; uname -r; uname -v";

Claim route_single(const ParsedCommand& cmd, const HandlerContext& ctx) {
    const Stage& stage = cmd.first();
    const std::string prog = stage.program();
    if (!stage.redirections.empty()) return unclaimed(unserved_decoy_events(cmd, ctx));

    if (prog == "ls") {
        auto opts = parse_ls_options(stage.argv());
        const bool literal = std::all_of(stage.words.begin(), stage.words.end(), [](const Word& w) { return w.literal(); });
        if (!opts || opts->operands.size() > 1 || !literal)
            return unclaimed({HandlerEvent{EventKind::LsEscape, cmd.raw, Bytes(cmd.raw)}});
        if (!ctx.overlay) return {};
        const std::string target = resolve(opts->operands.empty() ? "." : opts->operands.front(), ctx.cwd, ctx.home);
        if (!ctx.overlay->lookup(target) && ctx.overlay->list_dir(target).empty()) return {};
        Claim c;
        c.kind = HandlerKind::Ls;
        return c;
    }

    if (prog == "cat" || prog == "head" || prog == "tail") {
        std::optional<std::vector<const Word*>> ops;
        std::vector<std::string> option_words;
        if (prog == "cat") {
            ops = cat_operands(stage);
        } else if (auto c = counted_operands(stage, prog == "tail")) {
            ops = c->operands;
            option_words = c->option_words;
        }
        if (!ops || ops->empty() || !all_literal(*ops)) return unclaimed(unserved_decoy_events(cmd, ctx));
        std::size_t involved = 0;
        for (const Word* w : *ops) involved += lookup_word(*w, ctx) != nullptr;
        if (involved == 0) return {};
        Claim c;
        c.kind = prog == "cat" ? HandlerKind::Cat : prog == "head" ? HandlerKind::Head : HandlerKind::Tail;
        if (ops->size() > 1 && involved < ops->size()) {
            // Real operands are read again one at a time so their output can be
            // placed between the decoy segments.
            for (const Word* w : *ops) {
                if (lookup_word(*w, ctx)) continue;
                std::string probe = prog;
                for (const auto& o : option_words) probe += " " + o;
                probe += " -- " + requote(*w);
                c.probes.push_back(std::move(probe));
            }
        }
        return c;
    }

    if (prog == "uname") {
        if (!uname_fields(stage.argv()) || !overlay_kernel(ctx)) return {};
        Claim c;
        c.kind = HandlerKind::Uname;
        c.probes.push_back(kUnameProbe);
        return c;
    }

    return unclaimed(unserved_decoy_events(cmd, ctx));
}

}  // namespace

Claim route(const ParsedCommand& cmd, const std::vector<DeceptionRule>& rules, const HandlerContext& ctx) {
    if (cmd.pipeline.empty()) return {};
    std::vector<HandlerEvent> rule_events;
    for (const auto& rule : rules) {
        if (!rule.matches(cmd)) continue;
        if (rule.action == RuleAction::ReplaceOutput || rule.action == RuleAction::Block) {
            Claim c;
            c.kind = HandlerKind::Rule;
            c.rule = &rule;
            if (rule.action == RuleAction::Block) {
                c.send_to_host = false;
                c.events.push_back(HandlerEvent{EventKind::SuspiciousCommand, cmd.raw, Bytes(rule.name)});
            }
            return c;
        }
        if (rule.action == RuleAction::AlertOnly)
            rule_events.push_back(HandlerEvent{EventKind::SuspiciousCommand, cmd.raw, Bytes(rule.name)});
        break;
    }
    Claim c;
    if (!cmd.complex) c = cmd.pipeline.size() > 1 ? route_pipeline(cmd, ctx) : route_single(cmd, ctx);
    c.events.insert(c.events.begin(), rule_events.begin(), rule_events.end());
    return c;
}

HandlerOutcome run_handler(const Claim& claim, const ParsedCommand& cmd, ByteView true_output,
                           const std::vector<Bytes>& probe_outputs, const HandlerContext& ctx) {
    switch (claim.kind) {
        case HandlerKind::Unclaimed: return identity(true_output);
        case HandlerKind::Rule: return apply_rule(*claim.rule, cmd, true_output, ctx);
        case HandlerKind::Ls: return handle_ls(cmd, true_output, ctx);
        case HandlerKind::Cat: return handle_cat(cmd, true_output, probe_outputs, ctx);
        case HandlerKind::Head:
        case HandlerKind::Tail: return handle_head(cmd, true_output, probe_outputs, ctx);
        case HandlerKind::Uname: return handle_uname(cmd, true_output, probe_outputs, ctx);
        case HandlerKind::Pipeline: {
            if (auto o = handle_pipeline(cmd, ctx)) return *o;
            auto o = identity(true_output);
            o.events.push_back(HandlerEvent{EventKind::PipelineEscape, cmd.raw, Bytes(cmd.raw)});
            return o;
        }
    }
    return identity(true_output);
}

// --- cat / head / tail ------------------------------------------------------

namespace {

std::string cat_missing(const std::string& op, const HandlerContext& ctx) {
    return "cat: " + op + ": No such file or directory" + ctx.eol();
}

std::string counted_missing(const std::string& prog, const std::string& op, const HandlerContext& ctx) {
    return prog + ": cannot open '" + op + "' for reading: No such file or directory" + ctx.eol();
}

}  // namespace

HandlerOutcome handle_cat(const ParsedCommand& cmd, ByteView true_output, const std::vector<Bytes>& probe_outputs,
                          const HandlerContext& ctx) {
    if (cmd.pipeline.size() != 1) return identity(true_output);
    auto ops = cat_operands(cmd.first());
    if (!ops || ops->empty() || !all_literal(*ops)) return identity(true_output);
    HandlerOutcome out;
    std::size_t involved = 0;
    for (const Word* w : *ops) involved += lookup_word(*w, ctx) != nullptr;
    if (involved == 0) return identity(true_output);
    const bool single = ops->size() == 1;
    std::size_t probe = 0;
    Bytes& body = out.result.modified_response;
    for (const Word* w : *ops) {
        const DecoyEntry* e = lookup_word(*w, ctx);
        if (!e) {
            if (single || involved == ops->size()) body += true_output;
            else if (probe < probe_outputs.size()) body += probe_outputs[probe++];
            continue;
        }
        out.events.push_back(decoy_access(e->vpath, cmd));
        if (e->mode == DecoyMode::Hide) body += cat_missing(w->text, ctx);
        else body += emit(e->content, ctx);
    }
    return out;
}

HandlerOutcome handle_head(const ParsedCommand& cmd, ByteView true_output, const std::vector<Bytes>& probe_outputs,
                           const HandlerContext& ctx) {
    if (cmd.pipeline.size() != 1) return identity(true_output);
    const Stage& stage = cmd.first();
    const std::string prog = stage.program();
    const bool tail = prog == "tail";
    auto counted = counted_operands(stage, tail);
    if (!counted || counted->operands.empty() || !all_literal(counted->operands)) return identity(true_output);
    const auto& ops = counted->operands;
    std::size_t involved = 0;
    for (const Word* w : ops) involved += lookup_word(*w, ctx) != nullptr;
    if (involved == 0) return identity(true_output);

    HandlerOutcome out;
    Bytes& body = out.result.modified_response;
    const bool headers = ops.size() > 1;
    bool first_header = true;
    std::size_t probe = 0;
    const std::string missing_prefix = prog + ": cannot open '";
    auto header = [&](const std::string& name) {
        if (!headers) return;
        body += first_header ? "" : ctx.eol();
        body += "==> " + name + " <==" + ctx.eol();
        first_header = false;
    };
    for (const Word* w : ops) {
        const DecoyEntry* e = lookup_word(*w, ctx);
        if (!e) {
            Bytes segment;
            if (ops.size() == 1) segment = Bytes(true_output);
            else if (probe < probe_outputs.size()) segment = probe_outputs[probe++];
            if (!starts_with(segment, missing_prefix)) header(w->text);
            body += segment;
            continue;
        }
        out.events.push_back(decoy_access(e->vpath, cmd));
        if (e->mode == DecoyMode::Hide) {
            body += counted_missing(prog, w->text, ctx);
            continue;
        }
        header(w->text);
        body += emit(tail ? tail_lines(e->content, counted->count) : head_lines(e->content, counted->count), ctx);
    }
    return out;
}

// --- uname ------------------------------------------------------------------

std::optional<KernelIdentity> parse_proc_version(ByteView text) {
    std::string line(text.substr(0, text.find('\n')));
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    static const std::regex head(R"(^(\S+) version (\S+) )");
    std::smatch m;
    if (!std::regex_search(line, m, head)) return std::nullopt;
    KernelIdentity k;
    k.sysname = m[1].str();
    k.release = m[2].str();
    for (std::size_t pos = line.find(" #"); pos != std::string::npos; pos = line.find(" #", pos + 1)) {
        if (pos + 2 < line.size() && std::isdigit(static_cast<unsigned char>(line[pos + 2]))) {
            k.version = line.substr(pos + 1);
            return k;
        }
    }
    return std::nullopt;
}

namespace {

std::vector<std::string> split_lines(ByteView text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < text.size()) {
        auto nl = text.find('\n', start);
        std::string line(text.substr(start, nl == ByteView::npos ? ByteView::npos : nl - start));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        if (nl == ByteView::npos) break;
        start = nl + 1;
    }
    return lines;
}

struct Span {
    std::size_t pos;
    std::size_t len;
    std::string with;
};

}  // namespace

HandlerOutcome handle_uname(const ParsedCommand& cmd, ByteView true_output, const std::vector<Bytes>& probe_outputs,
                            const HandlerContext& ctx) {
    const auto fake = overlay_kernel(ctx);
    const auto fields = cmd.pipeline.size() == 1 ? uname_fields(cmd.first().argv()) : std::nullopt;
    if (!fake || !fields) return identity(true_output);
    const auto real = probe_outputs.empty() ? std::vector<std::string>{} : split_lines(probe_outputs.front());
    if (real.size() < 3) {
        auto o = identity(true_output);
        o.events.push_back(HandlerEvent{EventKind::Degraded, "uname probe failed", Bytes(cmd.raw)});
        return o;
    }
    const bool all = fields->find('a') != std::string::npos;
    auto want = [&](char f) { return all || fields->find(f) != std::string::npos; };
    const std::string text(true_output);
    std::vector<Span> spans;
    auto overlaps = [&](std::size_t pos, std::size_t len) {
        return std::any_of(spans.begin(), spans.end(),
                           [&](const Span& s) { return pos < s.pos + s.len && s.pos < pos + len; });
    };
    auto substitute = [&](const std::string& from, const std::string& to) {
        if (from.empty() || from == to) return;
        for (std::size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + 1)) {
            if (!overlaps(pos, from.size())) {
                spans.push_back(Span{pos, from.size(), to});
                return;
            }
        }
    };
    // Longest first so the version text is never split by a release match.
    if (want('v')) substitute(real[2], fake->version);
    if (want('r')) substitute(real[1], fake->release);
    if (want('s')) substitute(real[0], fake->sysname);
    std::sort(spans.begin(), spans.end(), [](const Span& a, const Span& b) { return a.pos < b.pos; });
    HandlerOutcome out;
    std::size_t last = 0;
    for (const auto& s : spans) {
        out.result.modified_response.append(text, last, s.pos - last);
        out.result.modified_response += s.with;
        last = s.pos + s.len;
    }
    out.result.modified_response.append(text, last, std::string::npos);
    return out;
}

// --- pipelines --------------------------------------------------------------

std::optional<HandlerOutcome> handle_pipeline(const ParsedCommand& cmd, const HandlerContext& ctx) {
    if (cmd.pipeline.size() < 2 || cmd.complex || !pipeline_supported(cmd, ctx)) return std::nullopt;
    const Stage& first = cmd.first();
    const std::string prog = first.program();
    HandlerOutcome out;
    Bytes data;
    Bytes errors;
    std::optional<CountedOperands> counted;
    std::vector<const Word*> ops;
    if (prog == "cat") {
        ops = *cat_operands(first);
    } else {
        counted = counted_operands(first, prog == "tail");
        ops = counted->operands;
    }
    bool first_header = true;
    for (const Word* w : ops) {
        const DecoyEntry* e = lookup_word(*w, ctx);
        out.events.push_back(decoy_access(e->vpath, cmd));
        if (e->mode == DecoyMode::Hide) {
            errors += prog == "cat" ? cat_missing(w->text, ctx) : counted_missing(prog, w->text, ctx);
            continue;
        }
        if (!counted) {
            data += e->content;
            continue;
        }
        if (ops.size() > 1) {
            data += first_header ? "" : "\n";
            data += "==> " + w->text + " <==\n";
            first_header = false;
        }
        data += prog == "tail" ? tail_lines(e->content, counted->count) : head_lines(e->content, counted->count);
    }
    for (std::size_t s = 1; s < cmd.pipeline.size(); ++s) data = (*make_filter(cmd.pipeline[s].argv()))(data);
    out.result.send_before = errors;
    out.result.modified_response = emit(data, ctx);
    return out;
}

// --- rules --------------------------------------------------------------------

HandlerOutcome apply_rule(const DeceptionRule& rule, const ParsedCommand&, ByteView true_output,
                          const HandlerContext& ctx) {
    HandlerOutcome out;
    switch (rule.action) {
        case RuleAction::ReplaceOutput: {
            std::string text = render_template(rule.template_text, ctx);
            if (!text.empty() && text.back() != '\n') text += '\n';
            out.result.modified_response = emit(text, ctx);
            return out;
        }
        case RuleAction::Block:
            out.result.send_before = ctx.eol();
            out.result.modified_response = emit(rule.message, ctx);
            out.result.send_after = ctx.eol();
            return out;
        case RuleAction::OverlayFs:
        case RuleAction::AlertOnly: return identity(true_output);
    }
    return identity(true_output);
}

// --- ls -----------------------------------------------------------------------

std::optional<LsOptions> parse_ls_options(const std::vector<std::string>& argv) {
    LsOptions o;
    bool options_done = false;
    for (std::size_t i = 1; i < argv.size(); ++i) {
        const std::string& a = argv[i];
        if (options_done || a == "-" || a.empty() || a[0] != '-') {
            o.operands.push_back(a);
            continue;
        }
        if (a == "--") {
            options_done = true;
        } else if (starts_with(a, "--")) {
            if (a == "--all") o.all = true;
            else if (a == "--human-readable") o.human = true;
            else if (a == "--color" || starts_with(a, "--color=")) continue;
            else return std::nullopt;
        } else {
            for (std::size_t k = 1; k < a.size(); ++k) {
                switch (a[k]) {
                    case 'a': o.all = true; break;
                    case 'l': o.long_format = true; break;
                    case '1': o.one_per_line = true; break;
                    case 'h': o.human = true; break;
                    default: return std::nullopt;
                }
            }
        }
    }
    return o;
}

namespace {

std::uint64_t blocks_kib(std::uint64_t bytes) { return (bytes + 4095) / 4096 * 4; }

std::optional<std::uint64_t> parse_size(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::size_t i = 0;
    double v = 0;
    double scale = 1;
    bool frac = false;
    for (; i < s.size(); ++i) {
        const char c = s[i];
        if (c >= '0' && c <= '9') {
            if (frac) {
                scale /= 10;
                v += (c - '0') * scale;
            } else {
                v = v * 10 + (c - '0');
            }
        } else if (c == '.' && !frac) {
            frac = true;
        } else {
            break;
        }
    }
    if (i == 0) return std::nullopt;
    if (i < s.size()) {
        const auto u = std::string_view("KMGTPE").find(s[i]);
        if (u == std::string_view::npos || i + 1 != s.size()) return std::nullopt;
        for (std::size_t k = 0; k <= u; ++k) v *= 1024;
    }
    return static_cast<std::uint64_t>(v);
}

Bytes decoy_cell(const std::string& name, const DecoyEntry& e, bool colored) {
    if (colored && e.executable()) return restyle(std::vector<StyleRun>{StyleRun{name, std::string("01;32")}});
    return name;
}

LongFields decoy_long_fields(const DecoyEntry& e, bool human, const HandlerContext& ctx) {
    LongFields lf;
    lf.fields.push_back(format_permissions(e.meta.permissions & 07777));
    lf.fields.push_back("1");
    lf.fields.push_back(e.meta.owner.empty() ? ctx.username : e.meta.owner);
    lf.fields.push_back(e.meta.group.empty() ? ctx.username : e.meta.group);
    lf.fields.push_back(human ? human_size(e.size()) : std::to_string(e.size()));
    for (auto& f : format_ls_date(e.meta.mtime.value_or(ctx.start_time), ctx.now)) lf.fields.push_back(std::move(f));
    return lf;
}

Bytes finish(Bytes rendered, const HandlerContext& ctx) { return ctx.tty ? rendered : from_crlf(rendered); }

}  // namespace

HandlerOutcome handle_ls(const ParsedCommand& cmd, ByteView true_output, const HandlerContext& ctx) {
    if (cmd.pipeline.size() != 1 || !ctx.overlay) return identity(true_output);
    auto opts = parse_ls_options(cmd.first().argv());
    if (!opts || opts->operands.size() > 1) return identity(true_output);
    const LsFormat format =
        opts->long_format ? LsFormat::Long : (opts->one_per_line || !ctx.tty) ? LsFormat::OnePerLine : LsFormat::Columns;

    HandlerOutcome out;
    const std::string operand = opts->operands.empty() ? std::string() : opts->operands.front();
    const std::string target = resolve(operand.empty() ? "." : operand, ctx.cwd, ctx.home);

    if (const DecoyEntry* e = ctx.overlay->lookup(target)) {
        if (e->mode == DecoyMode::Hide) {
            out.result.modified_response = "ls: cannot access '" + operand + "': No such file or directory" + ctx.eol();
            return out;
        }
        LsEntry entry;
        entry.name = operand;
        entry.cell = operand;
        if (format == LsFormat::Long) {
            LsListing listing;
            listing.format = format;
            entry.long_fields = decoy_long_fields(*e, opts->human, ctx);
            listing.entries.push_back(std::move(entry));
            out.result.modified_response = finish(render_long(listing), ctx);
        } else {
            out.result.modified_response = operand + ctx.eol();
        }
        return out;
    }

    const DirListing dl = ctx.overlay->list_dir(target);
    if (dl.empty() || starts_with(true_output, "ls: ")) return identity(true_output);
    auto listing = parse_ls_output(true_output, format);
    if (!listing) {
        out = identity(true_output);
        out.events.push_back(HandlerEvent{EventKind::LsEscape, cmd.raw, Bytes(cmd.raw)});
        return out;
    }

    std::vector<std::string> decoys;
    for (const auto& name : dl.adds) decoys.push_back(name);
    for (const auto& name : dl.overrides) decoys.push_back(name);
    const std::set<std::string> decoy_set(decoys.begin(), decoys.end());
    std::int64_t total_delta = 0;
    bool changed = false;
    std::vector<LsEntry> kept;
    for (auto& e : listing->entries) {
        if (dl.hides.count(e.name) || decoy_set.count(e.name)) {
            changed = true;
            if (e.long_fields) {
                if (auto sz = parse_size(e.long_fields->fields[4])) total_delta -= static_cast<std::int64_t>(blocks_kib(*sz));
            }
            continue;
        }
        kept.push_back(std::move(e));
    }
    std::vector<std::string> real_names;
    for (const auto& e : kept) real_names.push_back(e.name);
    const Collation coll = detect_collation(real_names, ctx.collation_fallback);
    std::vector<std::string> visible;
    for (const auto& name : decoys)
        if (opts->all || name.front() != '.') visible.push_back(name);
    std::sort(visible.begin(), visible.end(), [&](const auto& a, const auto& b) { return collation_less(coll, a, b); });

    std::vector<LsEntry> merged;
    std::size_t k = 0;
    for (const auto& name : visible) {
        const DecoyEntry& d = *ctx.overlay->lookup(join_path(target, name));
        while (k < kept.size() && !collation_less(coll, name, kept[k].name)) merged.push_back(std::move(kept[k++]));
        LsEntry entry;
        entry.name = name;
        entry.cell = decoy_cell(name, d, listing->colored);
        if (format == LsFormat::Long) entry.long_fields = decoy_long_fields(d, opts->human, ctx);
        merged.push_back(std::move(entry));
        total_delta += static_cast<std::int64_t>(blocks_kib(d.size()));
        changed = true;
    }
    while (k < kept.size()) merged.push_back(std::move(kept[k++]));
    if (!changed) return identity(true_output);

    listing->entries = std::move(merged);
    Bytes rendered;
    switch (format) {
        case LsFormat::Columns: rendered = render_columns(listing->entries, ctx.pty_cols, listing->uses_tabs); break;
        case LsFormat::OnePerLine: rendered = render_one_per_line(listing->entries); break;
        case LsFormat::Long: {
            if (listing->total_line) {
                const std::string plain = strip_escapes(*listing->total_line).text;
                if (auto total = parse_size(std::string_view(plain).substr(6))) {
                    std::int64_t kib = static_cast<std::int64_t>(opts->human ? *total / 1024 : *total) + total_delta;
                    kib = std::max<std::int64_t>(kib, 0);
                    listing->total_line = "total " + (opts->human ? human_size(static_cast<std::uint64_t>(kib) * 1024)
                                                                  : std::to_string(kib));
                }
            }
            rendered = render_long(*listing);
            break;
        }
    }
    out.result.modified_response = finish(std::move(rendered), ctx);
    return out;
}

}  // namespace sshdecoy
