// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on failure.

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "generators.hpp"
#include "ssh_harness.hpp"
#include "sshdecoy/bytes.hpp"
#include "sshdecoy/ls_format.hpp"
#include "sshdecoy/mock_ssh_server.hpp"
#include "sshdecoy/proxy.hpp"
#include "system_oracle.hpp"
#include "temp_dir.hpp"
#include "virtual_link.hpp"

using namespace sshdecoy;
using namespace sshdecoy::testing;
using namespace std::chrono_literals;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

using Steady = std::chrono::steady_clock;

double seconds_since(Steady::time_point start) {
    return std::chrono::duration<double>(Steady::now() - start).count();
}

std::string secs(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", t);
    return buf;
}

const Bytes kPasswords = "admin:Winter2019!\nbackup:b4ckup-2019\nroot:correct-horse-battery\n";

DecoyEntry decoy(const std::string& vpath, Bytes content, DecoyMode mode = DecoyMode::Add) {
    DecoyEntry d;
    d.vpath = vpath;
    d.mode = mode;
    d.content = std::move(content);
    return d;
}

std::shared_ptr<const OverlaySnapshot> overlay_of(const std::vector<DecoyEntry>& entries) {
    return std::make_shared<OverlaySnapshot>(OverlaySnapshot::from_entries(entries));
}

// A proxy in front of a mock host, with every event kept in memory.
struct Rig {
    MockSshServer host;
    std::shared_ptr<EventRecorder> recorder = std::make_shared<EventRecorder>();
    std::shared_ptr<MemorySink> sink = std::make_shared<MemorySink>();
    std::unique_ptr<ProxyServer> proxy;

    Rig(MockScript script, ProxyConfig config, std::vector<std::shared_ptr<EventSink>> extra = {})
        : host(std::move(script)) {
        config.listen = {"127.0.0.1", 0};
        config.host = host.endpoint();
        recorder->add_sink(sink);
        for (auto& s : extra) recorder->add_sink(s);
        proxy = std::make_unique<ProxyServer>(config, recorder);
        proxy->start();
    }
    ~Rig() {
        proxy->stop();
        host.stop();
    }

    Endpoint endpoint() const { return proxy->endpoint(); }

    // Waits until every proxied session has finished its bookkeeping.
    void drain() {
        const auto deadline = Steady::now() + 10s;
        while (proxy->active_sessions() > 0 && Steady::now() < deadline) std::this_thread::sleep_for(10ms);
    }

    std::vector<DeceptionEvent> of(EventKind kind) const {
        std::vector<DeceptionEvent> out;
        for (auto& e : sink->events())
            if (e.kind == kind) out.push_back(e);
        return out;
    }
};

std::string prompt_of(const std::string& user) { return user + "@mock:~$ "; }

// --- 1 ----------------------------------------------------------------------

Outcome passthrough_fidelity() {
    const auto start = Steady::now();
    std::mt19937 rng(1001);
    std::vector<std::string> commands;
    for (int i = 0; i < 200; ++i) commands.push_back(random_command(rng));

    ProxyConfig config;
    config.banner.mode = BannerMode::Mirror;
    Rig rig(MockScript::standard(), config);
    expect(rig.proxy->banner() == MockScript::standard().banner, "mirrored banner differs from the host's");
    expect(ssh::grab_banner(rig.endpoint()) == ssh::grab_banner(rig.host.endpoint()), "banner probe differs");

    auto session = [&](const Endpoint& to) {
        ShellClient shell(to, "alice", "wonderland");
        expect(shell.wait_for(prompt_of("alice")), "no first prompt");
        for (const auto& c : commands) shell.run(c);
        shell.send("exit\r");
        shell.wait_closed();
        return shell.transcript();
    };
    const std::string direct = session(rig.host.endpoint());
    const std::string proxied = session(rig.endpoint());
    expect(proxied == direct, "transcripts differ (direct " + std::to_string(direct.size()) + " bytes, proxied " +
                                  std::to_string(proxied.size()) + " bytes)");

    // The same comparison in virtual time, with editing keys mixed in.
    EngineSettings st;
    VirtualLink link(st, SessionFacts{"alice", "10.0.0.9"}, MockScript::standard());
    DirectLink plain(MockScript::standard());
    link.start();
    plain.start();
    std::mt19937 keys_rng(1002);
    for (int i = 0; i < 200; ++i) {
        std::string keys = random_command(keys_rng);
        if (i % 3 == 0) keys += random_edit_keys(keys_rng, "ab ", 6, false);
        keys += "\r";
        link.type(keys);
        plain.type(keys);
    }
    expect(link.transcript() == plain.transcript(), "virtual-time transcripts differ");

    const double t = seconds_since(start);
    expect(t < 10.0, "took " + std::to_string(t) + " s");
    return {true, "200 commands over SSH and in virtual time, byte-identical, " + secs(t) + " s"};
}

// --- 2 ----------------------------------------------------------------------

Outcome line_editor_oracle() {
    const auto start = Steady::now();
    EngineSettings st;
    st.overlay = overlay_of({decoy("/home/alice/passwords.txt", kPasswords)});
    VirtualLink link(st, SessionFacts{"alice", "10.0.0.9"}, MockScript::standard());
    link.start();
    std::mt19937 rng(2002);
    constexpr int kSequences = 1200;
    int compared = 0;
    for (int i = 0; i < kSequences; ++i) {
        const Bytes keys = "echo " + random_edit_keys(rng, "abcxyz 019", 40, true);
        const std::size_t before = link.shell().executed().size();
        const std::size_t committed_before = link.engine().committed().size();
        link.type(keys + "\r");
        const auto& executed = link.shell().executed();
        const auto& committed = link.engine().committed();
        expect(committed.size() == committed_before + 1, "sequence " + std::to_string(i) + " was not committed");
        const std::string expected = reference_edit(keys);
        const std::string got = committed.back();
        expect(executed.size() == before + 1, "sequence " + std::to_string(i) + " did not run on the host");
        const std::string& ran = executed.back().line;
        expect(got == ran, "sequence " + std::to_string(i) + ": proxy committed [" + got + "], host executed [" + ran + "]");
        expect(got == expected, "sequence " + std::to_string(i) + ": committed [" + got + "], reference [" + expected + "]");
        ++compared;
    }
    const double t = seconds_since(start);
    expect(t < 30.0, "took " + std::to_string(t) + " s");
    return {true, std::to_string(compared) + " sequences, 100% agreement, " + secs(t) + " s"};
}

// --- 3 ----------------------------------------------------------------------

// Names in listing order: ls fills columns top to bottom.
std::vector<std::string> ls_names(const std::string& body) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream lines(strip_escapes(body).text);
    for (std::string line; std::getline(lines, line);) {
        std::istringstream in(line);
        rows.emplace_back();
        for (std::string w; in >> w;) rows.back().push_back(w);
    }
    std::vector<std::string> names;
    for (std::size_t c = 0; !rows.empty() && c < rows.front().size(); ++c)
        for (const auto& row : rows)
            if (c < row.size()) names.push_back(row[c]);
    return names;
}

Outcome ls_injection() {
    const auto start = Steady::now();
    std::mt19937 rng(3003);
    const std::vector<std::string> flag_sets = {"", "-a", "-1", "-a1"};
    constexpr int kCases = 520;
    for (int n = 0; n < kCases; ++n) {
        const std::string dir = "/home/alice/work";
        const auto real = random_names(rng, std::uniform_int_distribution<int>(0, 50)(rng), "r");
        auto decoys = random_names(rng, std::uniform_int_distribution<int>(0, 5)(rng), "d");
        if (n % 7 == 0 && !decoys.empty()) decoys.front() = ".d" + decoys.front().substr(1);
        std::set<std::string> hidden;
        for (const auto& r : real)
            if (rng() % 8 == 0) hidden.insert(r);
        const int cols = std::uniform_int_distribution<int>(20, 200)(rng);
        const std::string flags = flag_sets[rng() % flag_sets.size()];

        MockScript actual = MockScript::standard();
        MockScript materialized = actual;
        actual.add_dir(dir);
        materialized.add_dir(dir);
        for (const auto& r : real) {
            actual.add_file(dir + "/" + r, "real");
            if (!hidden.count(r)) materialized.add_file(dir + "/" + r, "real");
        }
        std::vector<DecoyEntry> entries;
        for (const auto& d : decoys) {
            entries.push_back(decoy(dir + "/" + d, "decoy"));
            materialized.add_file(dir + "/" + d, "decoy");
        }
        for (const auto& h : hidden) entries.push_back(decoy(dir + "/" + h, "", DecoyMode::Hide));

        EngineSettings st;
        st.overlay = overlay_of(entries);
        VirtualLink link(st, SessionFacts{"alice", "10.0.0.9", cols, 24}, actual);
        DirectLink oracle(materialized, cols, 24);
        link.start();
        oracle.start();
        link.take_transcript();
        oracle.take_transcript();
        const std::string line = "ls " + (flags.empty() ? "" : flags + " ") + "work\r";
        link.type(line);
        oracle.type(line);
        const std::string got = link.take_transcript();
        const std::string want = oracle.take_transcript();
        const std::string label = "case " + std::to_string(n) + " (ls " + flags + ", " + std::to_string(cols) + " cols)";
        expect(got == want, label + ": output differs from a host where the decoys exist");

        const std::size_t body_begin = got.find("\r\n") + 2;
        const std::size_t body_end = got.rfind("\r\n") == std::string::npos ? body_begin : got.rfind("\r\n") + 2;
        const std::string body = got.substr(body_begin, body_end - body_begin);
        const auto names = ls_names(body);
        expect(std::is_sorted(names.begin(), names.end()), label + ": not sorted");
        const bool all = flags.find('a') != std::string::npos;
        for (const auto& d : decoys) {
            const auto count = std::count(names.begin(), names.end(), d);
            expect(count == ((d[0] == '.' && !all) ? 0 : 1), label + ": decoy " + d + " appears " + std::to_string(count) + " times");
        }
        for (const auto& h : hidden)
            expect(std::find(names.begin(), names.end(), h) == names.end(), label + ": hidden " + h + " listed");
        std::size_t pos = 0;
        while (pos < body.size()) {
            const auto eol = body.find("\r\n", pos);
            const std::string row = body.substr(pos, eol - pos);
            expect(display_width(row) <= static_cast<std::size_t>(cols), label + ": row wider than the terminal");
            pos = eol + 2;
        }
        if (n % 5 == 0) {
            // Resize mid-session and list again.
            const int narrow = std::max(20, cols / 2);
            link.engine().on_resize(narrow, 24);
            link.shell().resize(narrow, 24);
            oracle.shell().resize(narrow, 24);
            link.type(line);
            oracle.type(line);
            expect(link.take_transcript() == oracle.take_transcript(), label + ": differs after resize");
        }
    }
    return {true, std::to_string(kCases) + " directories, " + secs(seconds_since(start)) + " s"};
}

// --- 4 ----------------------------------------------------------------------

Outcome honey_credential() {
    ProxyConfig config;
    config.honey_credentials = {{"admin", "Winter2019!"}};
    Rig rig(MockScript::standard(), config);
    bool rejected = false;
    try {
        ssh_exec(rig.endpoint(), "admin", "Winter2019!", "id");
    } catch (const ssh::AuthFailed&) {
        rejected = true;
    }
    rig.drain();
    expect(rejected, "honey login was not rejected");
    expect(rig.host.connections() == 0, "host saw " + std::to_string(rig.host.connections()) + " connections");
    expect(rig.host.auth_attempts() == 0, "host saw authentication attempts");
    const auto honey = rig.of(EventKind::CredentialHoney);
    expect(honey.size() == 1, std::to_string(honey.size()) + " CredentialHoney events");
    expect(honey[0].username == "admin", "event username " + honey[0].username);
    return {true, "rejected, 0 host connections, 1 CredentialHoney event"};
}

// --- 5 ----------------------------------------------------------------------

Outcome scripted_decoy_session() {
    ProxyConfig config;
    config.overlay = overlay_of({decoy("/home/alice/passwords.txt", kPasswords)});
    Rig rig(MockScript::standard(), config);
    TempDir dir;
    const auto file = shell_quote(dir.put("passwords.txt", kPasswords).string());
    {
        ShellClient shell(rig.endpoint(), "alice", "wonderland");
        expect(shell.wait_for(prompt_of("alice")), "no prompt");
        expect(shell.run("cat ~/passwords.txt") == to_crlf(kPasswords), "cat output differs from the decoy");
        expect(shell.run("head -n 2 passwords.txt") == to_crlf(run_shell("head -n 2 " + file)), "head output differs");
        const std::string grep = shell.run("cat passwords.txt | grep admin");
        expect(grep == to_crlf(run_shell("LC_ALL=C grep admin " + file)), "grep output differs: " + grep);
        shell.send("exit\r");
        shell.wait_closed();
    }
    rig.drain();
    const auto access = rig.of(EventKind::DecoyAccess);
    expect(access.size() == 3, std::to_string(access.size()) + " DecoyAccess events");
    for (const auto& e : access) expect(e.detail == "/home/alice/passwords.txt", "event path " + e.detail);
    for (const auto& c : rig.host.executed())
        expect(c.line.find("passwords") == std::string::npos || c.line[0] != ' ', "hidden read of the decoy on the host");
    return {true, "3 DecoyAccess events, grep equals the reference filter"};
}

// --- 6 ----------------------------------------------------------------------

Outcome static_banner() {
    ProxyConfig config;
    config.banner.mode = BannerMode::Static;
    config.banner.value = "SSH-2.0-OpenSSH_7.4";
    MockScript script = MockScript::standard();
    Rig rig(script, config);
    for (int i = 0; i < 5; ++i) {
        const std::string got = ssh::grab_banner(rig.endpoint());
        expect(got == config.banner.value, "probe returned " + got);
        expect(got != script.banner, "probe returned the host banner");
    }
    ShellClient shell(rig.endpoint(), "alice", "wonderland");
    expect(shell.wait_for(prompt_of("alice")), "no prompt");
    shell.close();
    return {true, "5 probes returned exactly \"" + config.banner.value + "\""};
}

// --- 7 ----------------------------------------------------------------------

Outcome hidden_commands_invisible() {
    ProxyConfig config;
    config.overlay = overlay_of({decoy("/home/alice/passwords.txt", kPasswords)});
    MockScript script = MockScript::standard();
    Rig rig(script, config);
    std::string transcript;
    {
        ShellClient shell(rig.endpoint(), "alice", "wonderland");
        expect(shell.wait_for(prompt_of("alice")), "no prompt");
        const std::size_t mark = shell.size();
        shell.send("cat pass\t");
        expect(shell.wait_for("passwords.txt ", 10s, mark), "TAB did not complete the decoy");
        shell.send("\x03");
        expect(shell.wait_for(prompt_of("alice"), 10s, mark + 1), "no prompt after Ctrl-C");
        shell.send("exit\r");
        shell.wait_closed();
        transcript = shell.transcript();
    }
    rig.drain();
    MockShell reference(script);
    std::vector<std::string> hidden;
    for (const auto& c : rig.host.executed())
        if (!c.line.empty() && c.line[0] == ' ') hidden.push_back(c.line);
    expect(hidden.size() == 2, std::to_string(hidden.size()) + " hidden commands reached the host");
    for (const auto& h : hidden) {
        const std::string cmd = h.substr(1);
        expect(transcript.find(cmd) == std::string::npos, "transcript shows hidden command [" + cmd + "]");
        const std::string raw = reference.exec(cmd);
        expect(transcript.find(raw) == std::string::npos && transcript.find(to_crlf(raw)) == std::string::npos,
               "transcript shows the output of [" + cmd + "]");
    }
    for (const auto& c : rig.host.executed())
        if (c.line[0] == ' ') expect(!c.in_history, "hidden command in history: " + c.line);
    return {true, "pwd and one TAB mediation left no trace, host history clean"};
}

// --- 8 ----------------------------------------------------------------------

Outcome glob_untouched() {
    ProxyConfig config;
    config.overlay = overlay_of({decoy("/home/alice/passwords.txt", kPasswords), decoy("/home/alice/zz_decoy", "x")});
    MockScript script = MockScript::standard();
    Rig rig(script, config);
    std::string got;
    {
        ShellClient shell(rig.endpoint(), "alice", "wonderland");
        expect(shell.wait_for(prompt_of("alice")), "no prompt");
        got = shell.run("echo *");
        shell.send("exit\r");
        shell.wait_closed();
    }
    rig.drain();
    const std::string want = to_crlf(MockShell(script).exec("echo *"));
    expect(got == want, "echo * printed [" + got + "], host listing [" + want + "]");
    expect(got.find("passwords.txt") == std::string::npos && got.find("zz_decoy") == std::string::npos, "decoy in glob");
    expect(rig.of(EventKind::DecoyAccess).empty(), "DecoyAccess recorded");
    return {true, "real listing only, no DecoyAccess"};
}

// --- 9 ----------------------------------------------------------------------

Outcome concurrent_sessions() {
    const auto start = Steady::now();
    constexpr int kSessions = 16;
    MockScript script = MockScript::standard();
    std::vector<DecoyEntry> entries;
    std::vector<std::string> users, tokens;
    for (int i = 0; i < kSessions; ++i) {
        const std::string user = "user" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        users.push_back(user);
        tokens.push_back("token-" + std::to_string(1000 + i * 37));
        script.accounts[user] = "pw-" + user;
        entries.push_back(decoy("/home/" + user + "/secret_" + user + ".txt", "owner=" + user + " " + tokens[i] + "\n"));
    }
    TempDir dir;
    const auto events_file = dir.path / "events.jsonl";
    ProxyConfig config;
    config.overlay = overlay_of(entries);
    Rig rig(script, config, {std::make_shared<FileSink>(events_file)});

    std::vector<std::string> transcripts(kSessions);
    std::vector<std::string> errors(kSessions);
    std::vector<std::thread> threads;
    for (int i = 0; i < kSessions; ++i) {
        threads.emplace_back([&, i] {
            try {
                ShellClient shell(rig.endpoint(), users[i], "pw-" + users[i]);
                if (!shell.wait_for(prompt_of(users[i]), 15s)) throw std::runtime_error("no prompt");
                const std::string own = "secret_" + users[i] + ".txt";
                if (shell.run("cat " + own, 15s).find(tokens[i]) == std::string::npos) throw std::runtime_error("cat");
                if (shell.run("ls", 15s).find(own) == std::string::npos) throw std::runtime_error("ls");
                shell.run("head -n 1 " + own + " | grep owner", 15s);
                shell.send("exit\r");
                shell.wait_closed(15s);
                transcripts[i] = shell.transcript();
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        });
    }
    for (auto& t : threads) t.join();
    rig.drain();
    for (int i = 0; i < kSessions; ++i) expect(errors[i].empty(), users[i] + ": " + errors[i]);

    for (int i = 0; i < kSessions; ++i)
        for (int j = 0; j < kSessions; ++j) {
            if (i == j) continue;
            expect(transcripts[i].find(tokens[j]) == std::string::npos, users[i] + " saw the decoy of " + users[j]);
            expect(transcripts[i].find("secret_" + users[j]) == std::string::npos, users[i] + " saw " + users[j] + "'s name");
        }

    std::map<std::string, std::vector<DeceptionEvent>> by_session;
    for (const auto& e : rig.sink->events()) by_session[e.session_id].push_back(e);
    expect(by_session.size() == kSessions, std::to_string(by_session.size()) + " sessions recorded");
    std::set<std::string> seen_users;
    for (const auto& [id, list] : by_session) {
        expect(list.front().kind == EventKind::SessionOpen && list.back().kind == EventKind::SessionClose,
               id + ": not bracketed by open and close");
        std::string user;
        for (const auto& e : list)
            if (!e.username.empty()) user = e.username;
        expect(seen_users.insert(user).second, "two sessions attributed to " + user);
        int access = 0;
        for (std::size_t k = 0; k < list.size(); ++k) {
            const auto& e = list[k];
            if (k > 0) expect(e.ts >= list[k - 1].ts, id + ": timestamps go backwards");
            expect(e.client_ip == list.front().client_ip, id + ": client address changed");
            if (e.kind == EventKind::SessionOpen) continue;
            expect(e.username == user, id + ": event attributed to " + e.username + " not " + user);
            if (e.kind == EventKind::DecoyAccess) {
                ++access;
                expect(e.detail == "/home/" + user + "/secret_" + user + ".txt", id + ": access to " + e.detail);
            }
        }
        expect(access == 2, id + ": " + std::to_string(access) + " DecoyAccess events");
    }
    std::ifstream in(events_file);
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line); ++lines) {
        try {
            deserialize_event(line);
        } catch (const std::exception&) {
            throw Failure("interleaved or malformed line in the event file: " + line.substr(0, 80));
        }
    }
    expect(lines == rig.sink->events().size(), "event file has " + std::to_string(lines) + " lines");

    const double t = seconds_since(start);
    expect(t < 20.0, "took " + std::to_string(t) + " s");
    return {true, "16 sessions, attribution and isolation hold, " + secs(t) + " s"};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"pass-through fidelity", passthrough_fidelity},
        {"line-editor oracle", line_editor_oracle},
        {"ls injection", ls_injection},
        {"honey credential", honey_credential},
        {"scripted decoy session", scripted_decoy_session},
        {"static banner", static_banner},
        {"hidden commands invisible", hidden_commands_invisible},
        {"glob expansion untouched", glob_untouched},
        {"concurrent sessions", concurrent_sessions},
    };
    int failed = 0;
    int n = 0;
    for (const auto& [name, run] : criteria) {
        ++n;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("criterion %d %-28s %s  %s\n", n, name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", n - failed, n);
    return failed == 0 ? 0 : 1;
}
