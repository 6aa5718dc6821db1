#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sshdecoy/bytes.hpp"
#include "sshdecoy/channel.hpp"

namespace sshdecoy {

using Millis = std::chrono::milliseconds;

struct MockFile {
    Bytes content;
    bool directory = false;
    unsigned mode = 0644;
    std::int64_t mtime = 1634385600;  // seconds since the epoch
};

// Declarative description of a scripted host. Everything the shell prints
// derives from this and the input bytes, so runs are reproducible.
struct MockScript {
    std::string banner = "SSH-2.0-OpenSSH_8.4p1 Debian-5+deb11u1";
    std::string username = "alice";
    std::string password = "wonderland";
    std::string hostname = "mock";
    std::string home;  // default /home/<username>
    Bytes motd = "Linux mock 5.10.0-8-amd64 #1 SMP Debian 5.10.46-4 (2021-08-03) x86_64\n\nLast login: Sat Oct 16 12:00:00 2021 from 10.0.0.1\n";
    char terminator = '$';
    bool history_ignore_space = true;  // HISTCONTROL=ignorespace
    bool color = false;                // ls colors directories and executables
    bool ls_tabs = true;               // ls pads columns with tabs, as GNU ls does
    std::int64_t now = 1634385600;     // clock used for ls dates
    std::string sysname = "Linux";
    std::string release = "5.10.0-8-amd64";
    std::string version = "#1 SMP Debian 5.10.46-4 (2021-08-03)";
    std::string machine = "x86_64";
    std::map<std::string, MockFile> files;  // absolute path -> file; parents are implied directories
    // Further logins (username -> password). Each gets a copy of the main
    // user's home directory under /home/<username>.
    std::map<std::string, std::string> accounts;

    std::string home_dir() const { return home.empty() ? "/home/" + username : home; }
    void add_file(const std::string& path, Bytes content, unsigned mode = 0644);
    void add_dir(const std::string& path);

    // The default fixture: a small home directory with a few files.
    static MockScript standard();
    // YAML fixture (see tests/fixtures).
    static MockScript parse(std::string_view yaml);
    static MockScript load(const std::filesystem::path& path);

    // The script as seen by `user`, or nullopt when the credentials are wrong.
    std::optional<MockScript> login(const std::string& user, const std::string& pass) const;
};

struct ExecutedCommand {
    std::string line;  // as entered, leading space included
    bool in_history = false;
};

// A deterministic interactive shell with a readline-like editor. Driven by
// input bytes and a virtual clock; returns the bytes the terminal would show.
class MockShell {
public:
    explicit MockShell(MockScript script, int cols = 80, int rows = 24);

    Bytes start();                            // MOTD and first prompt
    Bytes feed(ByteView input, Millis now);   // keystrokes
    Bytes tick(Millis now);                   // completes virtual sleeps
    std::optional<Millis> next_deadline() const;
    void resize(int cols, int rows);
    bool exited() const { return exited_; }

    // Runs one command line without a terminal: no echo, LF line endings.
    Bytes exec(std::string_view line, int* status = nullptr);

    const std::vector<ExecutedCommand>& executed() const { return executed_; }
    const std::vector<std::string>& history() const { return history_; }
    std::string prompt() const;
    const MockScript& script() const { return script_; }

private:
    enum class Mode { Edit, Busy, Hang, Vimlike };

    void handle_byte_stream(Bytes& out, Millis now);
    void key_printable(Bytes& out, char32_t ch);
    void key_backspace(Bytes& out);
    void key_delete(Bytes& out);
    void key_left(Bytes& out);
    void key_right(Bytes& out);
    void key_home(Bytes& out);
    void key_end(Bytes& out);
    void key_history(Bytes& out, int direction);
    void key_tab(Bytes& out);
    void key_kill_backward(Bytes& out);
    void key_interrupt(Bytes& out);
    void key_enter(Bytes& out, Millis now);
    void redraw_tail(Bytes& out, std::size_t erased);

    Bytes run_line(const std::string& line, int* status, Millis now);

    MockScript script_;
    int cols_;
    int rows_;
    std::string cwd_;
    std::string oldpwd_;
    std::u32string line_;
    std::size_t cursor_ = 0;
    std::vector<std::string> history_;
    std::size_t history_pos_ = 0;
    std::vector<ExecutedCommand> executed_;
    Bytes input_;  // undecoded keystrokes
    Mode mode_ = Mode::Edit;
    Millis busy_until_{0};
    bool pty_ = true;
    bool exited_ = false;
    bool last_tab_ = false;

    friend class MockCommands;
};

// Serves a MockShell over a channel until the shell exits or the channel
// closes. Virtual sleeps complete after the equivalent real delay.
void serve_mock_shell(MockShell& shell, DuplexChannel& channel);

}  // namespace sshdecoy
