#include <doctest.h>

#include "sshdecoy/bytes.hpp"
#include "virtual_link.hpp"

using namespace sshdecoy;
using namespace sshdecoy::testing;

namespace {

const Bytes kPasswords = "admin:Winter2019!\nroot:correct-horse-battery\n";

DecoyEntry decoy(const std::string& vpath, Bytes content) {
    DecoyEntry d;
    d.vpath = vpath;
    d.content = std::move(content);
    return d;
}

EngineSettings settings_with(std::vector<DecoyEntry> decoys, std::vector<DeceptionRule> rules = {}) {
    EngineSettings s;
    s.overlay = std::make_shared<OverlaySnapshot>(OverlaySnapshot::from_entries(decoys));
    s.rules = std::make_shared<std::vector<DeceptionRule>>(std::move(rules));
    return s;
}

struct Session {
    std::shared_ptr<EventRecorder> recorder = std::make_shared<EventRecorder>();
    std::shared_ptr<MemorySink> sink = std::make_shared<MemorySink>();
    SessionEvents events{recorder, "s1", "10.0.0.9"};
    VirtualLink link;

    Session(EngineSettings settings, MockScript script = MockScript::standard(), int cols = 80)
        : link((recorder->add_sink(sink), std::move(settings)), SessionFacts{script.username, "10.0.0.9", cols, 24},
               script, &events) {
        events.set_username(script.username);
        link.start();
    }

    std::vector<DeceptionEvent> of(EventKind kind) const {
        std::vector<DeceptionEvent> out;
        for (auto& e : sink->events())
            if (e.kind == kind) out.push_back(e);
        return out;
    }
};

}  // namespace

TEST_CASE("bootstrap learns the home directory with one hidden pwd") {
    Session s(settings_with({decoy("/home/alice/passwords.txt", kPasswords)}));
    DirectLink direct(MockScript::standard());
    direct.start();
    CHECK(s.link.transcript() == direct.transcript());
    CHECK(s.link.engine().phase() == Phase::AtPrompt);
    CHECK(s.link.engine().home() == "/home/alice");
    CHECK(s.link.engine().hidden_commands() == std::vector<std::string>{" pwd"});
    CHECK(s.link.shell().history().empty());
}

TEST_CASE("cat of a decoy shows the decoy and records the access") {
    Session s(settings_with({decoy("/home/alice/passwords.txt", kPasswords)}));
    s.link.take_transcript();
    s.link.type("cat ~/passwords.txt\r");
    CHECK(s.link.take_transcript() == "cat ~/passwords.txt\r\n" + to_crlf(kPasswords) + "alice@mock:~$ ");
    auto access = s.of(EventKind::DecoyAccess);
    REQUIRE(access.size() == 1);
    CHECK(access[0].detail == "/home/alice/passwords.txt");
    CHECK(access[0].username == "alice");
    CHECK(s.link.shell().executed().back().line == "cat ~/passwords.txt");
}

TEST_CASE("cd is tracked through the prompt") {
    Session s(settings_with({decoy("/etc/backup.conf", "x=1\n")}));
    s.link.type("cd /etc\r");
    CHECK(s.link.engine().cwd() == "/etc");
    s.link.take_transcript();
    s.link.type("cat backup.conf\r");
    CHECK(s.link.take_transcript() == "cat backup.conf\r\nx=1\r\nalice@mock:/etc$ ");
}

TEST_CASE("Ctrl-C reaches a running command") {
    Session s(settings_with({decoy("/home/alice/passwords.txt", kPasswords)}));
    DirectLink direct(MockScript::standard());
    direct.start();
    s.link.take_transcript();
    direct.take_transcript();
    for (const char* keys : {"hang\r", "\x03", "echo back\r"}) {
        s.link.type(keys);
        direct.type(keys);
    }
    CHECK(s.link.transcript() == direct.transcript());
    CHECK(s.link.engine().phase() == Phase::AtPrompt);
}

TEST_CASE("a claimed command without a prompt falls back to passthrough") {
    Session s(settings_with({decoy("/home/alice/passwords.txt", kPasswords)}));
    s.link.type("cat passwords.txt; hang\r");  // compound: not claimed
    CHECK(s.link.engine().phase() == Phase::InteractiveProgram);
    s.link.type("\x03");
    CHECK(s.link.engine().phase() != Phase::InteractiveProgram);
    s.link.take_transcript();
    s.link.type("cat passwords.txt\r");
    CHECK(s.link.take_transcript().find(to_crlf(kPasswords)) != Bytes::npos);
}

TEST_CASE("no prompt during bootstrap degrades to passthrough after the timeout") {
    MockScript script = MockScript::standard();
    script.terminator = '%';
    EngineSettings st = settings_with({decoy("/home/alice/passwords.txt", kPasswords)});
    st.prompt = PromptPattern::generic({'$', '#'});
    Session s(st, script);
    CHECK(s.link.engine().phase() == Phase::InteractiveProgram);
    CHECK(s.link.now() >= st.output_timeout);
    auto degraded = s.of(EventKind::Degraded);
    REQUIRE(degraded.size() == 1);
    CHECK(degraded[0].detail == "no prompt within output timeout");
    DirectLink direct(script);
    direct.start();
    CHECK(s.link.transcript() == direct.transcript());
    s.link.type("cat passwords.txt\r");
    CHECK(s.link.shell().executed().back().line == "cat passwords.txt");
}

TEST_CASE("block rules stop the command before it reaches the host") {
    DeceptionRule block;
    block.name = "no-wget";
    block.program = "wget";
    block.action = RuleAction::Block;
    block.message = "wget: command not found";
    Session s(settings_with({}, {block}));
    s.link.take_transcript();
    s.link.type("wget http://x/y\r");
    CHECK(s.link.take_transcript() == "wget http://x/y\r\nwget: command not found\r\n" + Bytes("alice@mock:~$ "));
    for (const auto& c : s.link.shell().executed()) CHECK(c.line.find("wget") == std::string::npos);
    auto sus = s.of(EventKind::SuspiciousCommand);
    REQUIRE(sus.size() == 1);
    CHECK(sus[0].evidence == "no-wget");
}

TEST_CASE("TAB completes decoy names and lists on the second press") {
    Session s(settings_with({decoy("/home/alice/passwords.txt", kPasswords), decoy("/home/alice/notes.bak", "b\n")}));
    s.link.take_transcript();
    s.link.type("cat pas\t");
    s.link.type("\r");
    CHECK(s.link.shell().executed().back().line == "cat passwords.txt ");
    CHECK(s.link.take_transcript().find(to_crlf(kPasswords)) != Bytes::npos);

    s.link.type("cat no\t");
    s.link.type("\t");
    const Bytes shown = s.link.take_transcript();
    CHECK(shown.find("notes.bak  notes.txt") != Bytes::npos);
    s.link.type("bak\r");
    CHECK(s.link.shell().executed().back().line == "cat notes.bak");
    CHECK(s.of(EventKind::DecoyAccess).size() == 2);
    for (const auto& h : s.link.engine().hidden_commands()) {
        CHECK(h[0] == ' ');
        CHECK(s.link.transcript().find(h.substr(1)) == Bytes::npos);
    }
    for (const auto& entry : s.link.shell().history()) CHECK(entry.find("ls -1ap") == std::string::npos);
}

TEST_CASE("TAB without overlay involvement is forwarded") {
    Session s(settings_with({decoy("/etc/backup.conf", "x\n")}));
    DirectLink direct(MockScript::standard());
    direct.start();
    s.link.take_transcript();
    direct.take_transcript();
    for (const char* keys : {"cat not\t", "\r", "ec\t", "hi\r"}) {
        s.link.type(keys);
        direct.type(keys);
    }
    CHECK(s.link.transcript() == direct.transcript());
    CHECK(s.link.engine().hidden_commands().size() == 1);
}

TEST_CASE("key-offset history skips hidden entries") {
    MockScript script = MockScript::standard();
    script.history_ignore_space = false;
    EngineSettings st = settings_with({decoy("/home/alice/passwords.txt", kPasswords)});
    st.history_mode = HistorySkipMode::KeyOffset;
    Session s(st, script);
    CHECK(s.link.engine().hidden_commands() == std::vector<std::string>{"pwd"});
    s.link.type("echo one\r");
    s.link.type("echo two\r");
    s.link.type("\x1b[A\x1b[A");
    s.link.type("\r");
    CHECK(s.link.shell().executed().back().line == "echo one");
    s.link.type("\x1b[A\x1b[A\x1b[A\x1b[A");
    s.link.type("\r");
    CHECK(s.link.shell().executed().back().line == "echo one");
    CHECK(s.link.transcript().find("pwd") == Bytes::npos);
}

TEST_CASE("full-screen programs pass through and editing resumes after") {
    Session s(settings_with({decoy("/home/alice/passwords.txt", kPasswords)}));
    s.link.type("vimlike notes.txt\r");
    s.link.type(":q");
    s.link.take_transcript();
    s.link.type("cat passwords.txt\r");
    CHECK(s.link.take_transcript().find(to_crlf(kPasswords)) != Bytes::npos);
}

TEST_CASE("ls columns follow a resize") {
    MockScript materialized = MockScript::standard();
    for (int i = 0; i < 4; ++i) materialized.add_file("/home/alice/decoy_" + std::to_string(i), "d");
    std::vector<DecoyEntry> decoys;
    for (int i = 0; i < 4; ++i) decoys.push_back(decoy("/home/alice/decoy_" + std::to_string(i), "d"));
    Session s(settings_with(decoys));
    DirectLink direct(materialized);
    direct.start();
    s.link.engine().on_resize(30, 24);
    s.link.shell().resize(30, 24);
    direct.shell().resize(30, 24);
    s.link.take_transcript();
    direct.take_transcript();
    s.link.type("ls\r");
    direct.type("ls\r");
    CHECK(s.link.transcript() == direct.transcript());
}

TEST_CASE("exec mediation serves decoys and merges stderr") {
    MockShell shell(MockScript::standard());
    auto host = [&](const std::string& cmd) {
        HostExecResult r;
        r.out = shell.exec(cmd, &r.status);
        return r;
    };
    auto recorder = std::make_shared<EventRecorder>();
    auto sink = std::make_shared<MemorySink>();
    recorder->add_sink(sink);
    SessionEvents events(recorder, "s1", "10.0.0.9");
    const auto st = settings_with({decoy("/home/alice/passwords.txt", kPasswords)});
    const SessionFacts facts{"alice", "10.0.0.9"};

    auto cat = mediate_exec("cat passwords.txt", st, facts, &events, host);
    REQUIRE(cat);
    CHECK(cat->out == kPasswords);
    CHECK(cat->status == 0);
    auto grep = mediate_exec("head -n 1 passwords.txt | grep admin", st, facts, &events, host);
    REQUIRE(grep);
    CHECK(grep->out == "admin:Winter2019!\n");
    CHECK_FALSE(mediate_exec("id", st, facts, &events, host));
    CHECK_FALSE(mediate_exec("id", EngineSettings{}, facts, &events, host));
    CHECK(sink->events().size() == 2);
}
