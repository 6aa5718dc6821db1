#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sshdecoy/bytes.hpp"
#include "sshdecoy/command_handlers.hpp"
#include "sshdecoy/command_line.hpp"
#include "sshdecoy/config.hpp"
#include "sshdecoy/decoy_overlay.hpp"
#include "sshdecoy/events.hpp"
#include "sshdecoy/ls_format.hpp"
#include "sshdecoy/prompt_detector.hpp"
#include "sshdecoy/terminal_codec.hpp"

namespace sshdecoy {

using Millis = std::chrono::milliseconds;

enum class Phase {
    PreAuth,
    Bootstrapping,
    AtPrompt,
    CollectingCommand,
    AwaitingOutput,
    InteractiveProgram,
    TabCompleting,
    Closed,
};

const char* to_string(Phase phase);

// Settings shared by every session of one proxy run.
struct EngineSettings {
    PromptPattern prompt = PromptPattern::generic();
    bool prompt_fixed = false;  // operator override: never relearned
    HistorySkipMode history_mode = HistorySkipMode::SpacePrefix;
    Millis output_timeout{30000};
    Millis tab_settle{150};
    std::shared_ptr<const std::vector<DeceptionRule>> rules = std::make_shared<std::vector<DeceptionRule>>();
    std::shared_ptr<const OverlaySnapshot> overlay = std::make_shared<OverlaySnapshot>();
    Collation collation = Collation::C;
    std::chrono::system_clock::time_point start_time = std::chrono::system_clock::now();

    static EngineSettings from_config(const ProxyConfig& config);
};

struct SessionFacts {
    std::string username;
    std::string client_ip;
    int cols = 80;
    int rows = 24;
};

// The interactive command loop of one shell channel, written without I/O:
// feed it bytes and clock readings, then drain what it wants to send. All
// decisions are a function of the inputs, so tests can drive it in virtual
// time.
class SessionEngine {
public:
    SessionEngine(EngineSettings settings, SessionFacts facts, SessionEvents* events = nullptr);

    void on_host_data(ByteView data, Millis now);
    void on_client_data(ByteView data, Millis now);
    void on_tick(Millis now);
    void on_resize(int cols, int rows);
    void on_host_closed();
    void on_client_closed();

    std::optional<Millis> next_deadline() const;
    Bytes take_to_client();
    Bytes take_to_host();

    Phase phase() const;
    bool closed() const { return mode_ == Mode::Closed; }
    const std::string& cwd() const { return cwd_; }
    const std::string& home() const { return home_; }
    const PromptPattern& prompt_pattern() const { return prompt_; }
    // Every command line the proxy issued on its own, as sent.
    const std::vector<std::string>& hidden_commands() const { return hidden_log_; }
    // Commands committed by the client as the proxy reconstructed them.
    const std::vector<std::string>& committed() const { return committed_; }

private:
    enum class Mode { Bootstrap, Edit, Passthrough, Capture, Swallow, TabSettle, EchoWait, Closed };

    struct Capture {
        enum class Kind { Command, Block, Hidden } kind = Kind::Command;
        std::string sent;  // hidden command text, for locating its echo
        Bytes buf;
        bool past_echo = false;
        Millis deadline{0};
        std::function<void(std::optional<Bytes>, Millis)> done;  // nullopt on timeout
    };
    struct Swallow {
        Bytes buf;
        std::function<bool(const Bytes&)> until;  // empty: wait for quiet
        Millis deadline{0};
        std::function<void(Millis)> done;
    };
    struct HostHistoryEntry {
        std::string text;
        bool hidden = false;
    };

    void drain_keys(Millis now);
    void handle_key(const KeyEvent& ev, Millis now);
    void commit(const KeyEvent& ev, Millis now);
    void finish_claim(const Claim& claim, const ParsedCommand& cmd, const Bytes& output,
                      const std::vector<Bytes>& probes, Millis now);
    void run_probes(std::shared_ptr<Claim> claim, std::shared_ptr<ParsedCommand> cmd, Bytes output,
                    std::shared_ptr<std::vector<Bytes>> probes, Millis now);
    void tab(const KeyEvent& ev, Millis now);
    void finish_settle();
    void history_key(const KeyEvent& ev, bool up, Millis now);

    void run_hidden(const std::string& command, const std::string& prefix,
                    std::function<void(std::optional<Bytes>, Millis)> done, Millis now);
    void start_swallow(std::function<bool(const Bytes&)> until, Millis timeout, std::function<void(Millis)> done,
                       Millis now);
    void enter_edit(Millis now);
    void enter_passthrough(Millis now);
    void passthrough_keys(ByteView keys);
    void bootstrap_prompt(const PromptMatch& match, Millis now);
    void adopt_prompt(const PromptMatch& match, ByteView buffer);
    std::optional<std::string> current_line() const;
    bool echo_caught_up() const;
    HandlerContext context(bool tty) const;
    void record(EventKind kind, std::string detail, Bytes evidence = {});
    void to_client(ByteView b) { to_client_.append(b); }
    void to_host(ByteView b) { to_host_.append(b); }

    EngineSettings settings_;
    SessionFacts facts_;
    SessionEvents* events_;
    PromptPattern prompt_;
    Mode mode_ = Mode::Bootstrap;

    Bytes to_client_;
    Bytes to_host_;
    Bytes boot_buf_;
    Millis boot_deadline_{-1};
    Bytes held_prompt_;

    KeyTokenizer tokenizer_;
    std::deque<KeyEvent> keys_;
    LineBuffer line_;
    bool tainted_ = false;
    bool typeahead_ = false;
    bool last_tab_ = false;
    LineRenderer renderer_;
    Bytes tail_;  // host output since the last line start, for prompt detection
    Bytes last_prompt_raw_;
    std::string prompt_plain_;
    std::string hostname_;
    std::string cwd_;
    std::string home_;

    std::optional<Capture> capture_;
    std::optional<Swallow> swallow_;
    Bytes settle_buf_;
    Millis settle_deadline_{0};
    std::function<void(Millis)> echo_done_;
    Millis echo_deadline_{0};

    std::vector<HostHistoryEntry> host_history_;
    std::size_t history_pos_ = 0;

    std::vector<std::string> hidden_log_;
    std::vector<std::string> committed_;
};

// Exec requests (ssh host command) are mediated without a terminal.
struct HostExecResult {
    Bytes out;
    Bytes err;
    int status = 0;
};
using HostExec = std::function<HostExecResult(const std::string&)>;

// Returns the mediated result, or nullopt when no handler claims the command
// and the caller should relay the host's streams untouched.
std::optional<HostExecResult> mediate_exec(const std::string& command, const EngineSettings& settings,
                                           const SessionFacts& facts, SessionEvents* events, const HostExec& host);

}  // namespace sshdecoy
