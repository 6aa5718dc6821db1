#pragma once

#include <chrono>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "sshdecoy/bytes.hpp"
#include "sshdecoy/command_line.hpp"
#include "sshdecoy/decoy_overlay.hpp"
#include "sshdecoy/events.hpp"
#include "sshdecoy/ls_format.hpp"

namespace sshdecoy {

// What the client receives for a claimed command, before the prompt.
struct HandlerResult {
    Bytes send_before;
    Bytes modified_response;
    Bytes send_after;

    Bytes concat() const { return send_before + modified_response + send_after; }
    bool operator==(const HandlerResult&) const = default;
};

struct HandlerEvent {
    EventKind kind = EventKind::DecoyAccess;
    std::string detail;
    Bytes evidence;

    bool operator==(const HandlerEvent&) const = default;
};

struct HandlerOutcome {
    HandlerResult result;
    std::vector<HandlerEvent> events;
};

enum class RuleAction { ReplaceOutput, OverlayFs, Block, AlertOnly };

const char* to_string(RuleAction action);
std::optional<RuleAction> rule_action_from_string(std::string_view name);

struct DeceptionRule {
    std::string name;
    std::string program;                    // first word of the first stage
    std::optional<std::string> args;        // ECMAScript regex searched in the joined arguments
    std::optional<std::regex> args_regex;   // compiled form of args
    RuleAction action = RuleAction::AlertOnly;
    std::string template_text;              // ReplaceOutput
    std::string message;                    // Block

    bool matches(const ParsedCommand& cmd) const;
};

// Template variables usable in ReplaceOutput: {{username}}, {{host}}, {{cwd}},
// {{home}}, {{client_ip}}.
const std::vector<std::string>& template_variables();
// Names of unknown variables referenced by a template, in order of appearance.
std::vector<std::string> unknown_template_variables(std::string_view text);

// Session facts handlers depend on. Handlers are pure functions of the
// command, the captured output and this context.
struct HandlerContext {
    const OverlaySnapshot* overlay = nullptr;
    std::string username;
    std::string hostname;
    std::string cwd;
    std::string home;
    std::string client_ip;
    int pty_cols = 80;
    bool tty = true;  // false for exec channels: LF line endings, no columns
    Collation collation_fallback = Collation::C;
    std::chrono::system_clock::time_point start_time{};
    std::chrono::system_clock::time_point now{};

    const char* eol() const { return tty ? "\r\n" : "\n"; }
};

std::string render_template(std::string_view text, const HandlerContext& ctx);

enum class HandlerKind { Unclaimed, Rule, Ls, Cat, Head, Tail, Uname, Pipeline };

const char* to_string(HandlerKind kind);

// Routing decision for one committed command.
struct Claim {
    HandlerKind kind = HandlerKind::Unclaimed;
    const DeceptionRule* rule = nullptr;
    std::vector<HandlerEvent> events;  // to record as soon as the command is routed
    // Hidden commands to run after the command's own output has been captured;
    // their outputs are passed to run_handler in the same order.
    std::vector<std::string> probes;
    bool send_to_host = true;          // false for Block rules

    bool claimed() const { return kind != HandlerKind::Unclaimed; }
};

// First matching rule wins (AlertOnly rules record an event and fall through
// to the built-in table); then ls, cat, head, tail, uname and pipelines over
// decoys; everything else is Unclaimed.
Claim route(const ParsedCommand& cmd, const std::vector<DeceptionRule>& rules, const HandlerContext& ctx);

HandlerOutcome run_handler(const Claim& claim, const ParsedCommand& cmd, ByteView true_output,
                           const std::vector<Bytes>& probe_outputs, const HandlerContext& ctx);

HandlerOutcome handle_ls(const ParsedCommand& cmd, ByteView true_output, const HandlerContext& ctx);
HandlerOutcome handle_cat(const ParsedCommand& cmd, ByteView true_output, const std::vector<Bytes>& probe_outputs,
                          const HandlerContext& ctx);
HandlerOutcome handle_head(const ParsedCommand& cmd, ByteView true_output, const std::vector<Bytes>& probe_outputs,
                           const HandlerContext& ctx);
HandlerOutcome handle_uname(const ParsedCommand& cmd, ByteView true_output, const std::vector<Bytes>& probe_outputs,
                            const HandlerContext& ctx);
// nullopt when any stage is unsupported.
std::optional<HandlerOutcome> handle_pipeline(const ParsedCommand& cmd, const HandlerContext& ctx);
HandlerOutcome apply_rule(const DeceptionRule& rule, const ParsedCommand& cmd, ByteView true_output,
                          const HandlerContext& ctx);

// Parsed ls options; nullopt for unsupported flags.
struct LsOptions {
    bool all = false;
    bool long_format = false;
    bool one_per_line = false;
    bool human = false;
    std::vector<std::string> operands;
};
std::optional<LsOptions> parse_ls_options(const std::vector<std::string>& argv);

// Kernel identity derived from a /proc/version text ("Linux version R (...) V").
struct KernelIdentity {
    std::string sysname;
    std::string release;
    std::string version;
};
std::optional<KernelIdentity> parse_proc_version(ByteView text);

}  // namespace sshdecoy
