#include <doctest.h>

#include <random>
#include <set>

#include "generators.hpp"
#include "sshdecoy/bytes.hpp"
#include "sshdecoy/command_handlers.hpp"
#include "sshdecoy/mock_host.hpp"
#include "system_oracle.hpp"
#include "temp_dir.hpp"

using namespace sshdecoy;
using namespace sshdecoy::testing;

namespace {

DecoyEntry decoy(const std::string& vpath, Bytes content, DecoyMode mode = DecoyMode::Add) {
    DecoyEntry d;
    d.vpath = vpath;
    d.mode = mode;
    d.content = std::move(content);
    return d;
}

const Bytes kPasswords = "admin:Winter2019!\nbackup:b4ckup-2019\nroot:correct-horse-battery\n";

OverlaySnapshot standard_overlay() {
    return OverlaySnapshot::from_entries({decoy("/home/alice/passwords.txt", kPasswords),
                                          decoy("/etc/backup.conf", "host=10.0.0.5\nuser=admin\n"),
                                          decoy("/home/alice/.bash_history", "", DecoyMode::Hide)});
}

HandlerContext context(const OverlaySnapshot& overlay, bool tty = true) {
    HandlerContext ctx;
    ctx.overlay = &overlay;
    ctx.username = "alice";
    ctx.hostname = "mock";
    ctx.cwd = "/home/alice";
    ctx.home = "/home/alice";
    ctx.client_ip = "10.0.0.9";
    ctx.tty = tty;
    return ctx;
}

HandlerOutcome run(const std::string& line, ByteView true_output, const HandlerContext& ctx,
                   const std::vector<DeceptionRule>& rules = {}, const std::vector<Bytes>& probes = {}) {
    const auto cmd = parse_command(line);
    const auto claim = route(cmd, rules, ctx);
    return run_handler(claim, cmd, true_output, probes, ctx);
}

DeceptionRule rule(const std::string& program, RuleAction action, std::string text = {}) {
    DeceptionRule r;
    r.name = program + "-rule";
    r.program = program;
    r.action = action;
    if (action == RuleAction::Block) r.message = text;
    else r.template_text = text;
    return r;
}

}  // namespace

TEST_CASE("route picks a handler only when the overlay or a rule is involved") {
    const auto overlay = standard_overlay();
    const auto ctx = context(overlay);
    std::vector<DeceptionRule> rules = {rule("uname", RuleAction::ReplaceOutput, "Linux {{host}}")};

    CHECK(route(parse_command("ls -la /etc"), rules, ctx).kind == HandlerKind::Ls);
    CHECK(route(parse_command("ls /usr"), rules, ctx).kind == HandlerKind::Unclaimed);
    CHECK(route(parse_command("vim x"), rules, ctx).kind == HandlerKind::Unclaimed);
    CHECK(route(parse_command("vim x"), rules, ctx).events.empty());
    CHECK(route(parse_command("uname -a"), rules, ctx).kind == HandlerKind::Rule);
    CHECK(route(parse_command("cat passwords.txt"), rules, ctx).kind == HandlerKind::Cat);
    CHECK(route(parse_command("cat /etc/hosts"), rules, ctx).kind == HandlerKind::Unclaimed);
    CHECK(route(parse_command("head -n 2 passwords.txt"), rules, ctx).kind == HandlerKind::Head);
    CHECK(route(parse_command("tail -3 ~/passwords.txt"), rules, ctx).kind == HandlerKind::Tail);
    CHECK(route(parse_command("cat passwords.txt | grep admin"), rules, ctx).kind == HandlerKind::Pipeline);
    CHECK(route(parse_command("echo *"), rules, ctx).kind == HandlerKind::Unclaimed);
    CHECK(route(parse_command("echo *"), rules, ctx).events.empty());
}

TEST_CASE("unsupported shapes escape with an event") {
    const auto overlay = standard_overlay();
    const auto ctx = context(overlay);

    auto ls = route(parse_command("ls -R"), {}, ctx);
    CHECK(ls.kind == HandlerKind::Unclaimed);
    REQUIRE(ls.events.size() == 1);
    CHECK(ls.events[0].kind == EventKind::LsEscape);

    auto awk = route(parse_command("cat passwords.txt | awk '{print $1}'"), {}, ctx);
    CHECK(awk.kind == HandlerKind::Unclaimed);
    REQUIRE(awk.events.size() == 2);
    CHECK(awk.events[0].kind == EventKind::PipelineEscape);
    CHECK(awk.events[1].kind == EventKind::DecoyAccess);
    CHECK(awk.events[1].detail == "/home/alice/passwords.txt");

    auto vim = route(parse_command("vim passwords.txt"), {}, ctx);
    CHECK(vim.kind == HandlerKind::Unclaimed);
    REQUIRE(vim.events.size() == 1);
    CHECK(vim.events[0].kind == EventKind::DecoyAccess);
}

TEST_CASE("cat serves decoy bytes and records one access per decoy operand") {
    const auto overlay = standard_overlay();
    const auto ctx = context(overlay);

    auto o = run("cat ~/passwords.txt", "cat: /home/alice/passwords.txt: No such file or directory\r\n", ctx);
    CHECK(o.result.concat() == to_crlf(kPasswords));
    REQUIRE(o.events.size() == 1);
    CHECK(o.events[0].kind == EventKind::DecoyAccess);
    CHECK(o.events[0].detail == "/home/alice/passwords.txt");

    auto hidden = run("cat .bash_history", "ls -la\r\n", ctx);
    CHECK(hidden.result.concat() == "cat: .bash_history: No such file or directory\r\n");

    auto exec = run("cat passwords.txt", "", context(overlay, false));
    CHECK(exec.result.concat() == kPasswords);
}

TEST_CASE("cat interleaves real operands from probes") {
    const auto overlay = standard_overlay();
    const auto ctx = context(overlay);
    const auto cmd = parse_command("cat notes.txt passwords.txt todo.txt");
    const auto claim = route(cmd, {}, ctx);
    REQUIRE(claim.kind == HandlerKind::Cat);
    REQUIRE(claim.probes.size() == 2);
    CHECK(claim.probes[0] == "cat -- notes.txt");
    CHECK(claim.probes[1] == "cat -- todo.txt");
    auto o = run_handler(claim, cmd, "ignored", {"N\r\n", "T\r\n"}, ctx);
    CHECK(o.result.concat() == "N\r\n" + to_crlf(kPasswords) + "T\r\n");
}

TEST_CASE("head and tail over a decoy agree with coreutils") {
    TempDir dir;
    std::mt19937 rng(7);
    const auto overlay_path = "/home/alice/data.txt";
    const std::vector<std::string> counts = {"-n 2", "-n 0", "-n 7", "-3", "-n -2", "-c 5", "-n +2", "-n 100"};
    for (int round = 0; round < 40; ++round) {
        Bytes content;
        const int lines = std::uniform_int_distribution<int>(0, 12)(rng);
        for (int i = 0; i < lines; ++i) content += "line " + std::to_string(i) + "\n";
        if (round % 3 == 0) content += "tail without newline";
        const auto file = dir.put("data.txt", content);
        const auto overlay = OverlaySnapshot::from_entries({decoy(overlay_path, content)});
        const auto ctx = context(overlay, false);
        for (const auto& prog : {"head", "tail"}) {
            for (const auto& count : counts) {
                if (std::string(prog) == "head" && count == "-n +2") continue;
                if (std::string(prog) == "tail" && count == "-n -2") continue;
                const std::string line = std::string(prog) + " " + count + " data.txt";
                const auto expected = run_shell("LC_ALL=C " + std::string(prog) + " " + count + " " +
                                                shell_quote(file.string()));
                auto o = run(line, "", ctx);
                INFO(line);
                CHECK(o.result.concat() == expected);
            }
        }
    }
}

TEST_CASE("head chains: head -n a | head -n b equals head -n min(a, b)") {
    std::mt19937 rng(11);
    for (int round = 0; round < 200; ++round) {
        Bytes content;
        const int lines = std::uniform_int_distribution<int>(0, 20)(rng);
        for (int i = 0; i < lines; ++i) content += std::to_string(rng() % 1000) + "\n";
        const auto overlay = OverlaySnapshot::from_entries({decoy("/home/alice/d", content)});
        const auto ctx = context(overlay, false);
        const int a = std::uniform_int_distribution<int>(0, 25)(rng);
        const int b = std::uniform_int_distribution<int>(0, 25)(rng);
        auto chained = run("head -n " + std::to_string(a) + " d | head -n " + std::to_string(b), "", ctx);
        auto direct = run("head -n " + std::to_string(std::min(a, b)) + " d", "", ctx);
        CHECK(chained.result.concat() == direct.result.concat());
    }
}

TEST_CASE("pipelines over decoys agree with coreutils in the C locale") {
    TempDir dir;
    const std::vector<std::string> filters = {
        "grep admin",      "grep -v admin",   "grep -i ADMIN",   "grep -c o",          "grep -n root",
        "grep -E 'ad|ro'", "grep -F '.'",     "grep -x admin",   "grep '^b.*9$'",      "grep -e admin -e root",
        "head -n 2",       "head -1",         "tail -n 2",       "tail -n +2",         "wc -l",
        "wc -w",           "wc -c",           "wc",              "sort",               "sort -r",
        "sort -n",         "sort -u",         "uniq",            "uniq -c",            "uniq -d",
        "sort | uniq -c",  "grep o | wc -l",  "sort -r | head -n 3", "grep -v '^$' | sort | uniq -c"};
    const std::vector<std::string> vocab = {"admin", "root",  "backup", "admin:x", "10", "9",    "",
                                            "Admin", "b2019", "root",   "a.b",     "ad", "zz 1"};
    std::mt19937 rng(3);
    for (int round = 0; round < 25; ++round) {
        Bytes content;
        const int lines = std::uniform_int_distribution<int>(0, 15)(rng);
        for (int i = 0; i < lines; ++i) content += vocab[rng() % vocab.size()] + "\n";
        const auto file = dir.put("decoy", content);
        const auto overlay = OverlaySnapshot::from_entries({decoy("/home/alice/decoy", content)});
        const auto ctx = context(overlay, false);
        for (const auto& f : filters) {
            const auto expected = run_shell("cd " + shell_quote(dir.path.string()) + " && cat decoy | LC_ALL=C " + f);
            const std::string line = "cat decoy | " + f;
            auto o = run(line, "", ctx);
            INFO(line << " over " << content);
            CHECK(o.result.concat() == expected);
            REQUIRE(o.events.size() == 1);
            CHECK(o.events[0].kind == EventKind::DecoyAccess);
        }
    }
}

TEST_CASE("ls injection matches GNU ls on a directory where the decoys exist") {
    std::mt19937 rng(5);
    for (int round = 0; round < 60; ++round) {
        TempDir real;
        TempDir materialized;
        const auto real_names = random_names(rng, std::uniform_int_distribution<int>(0, 30)(rng), "f");
        const auto decoy_names = random_names(rng, std::uniform_int_distribution<int>(0, 5)(rng), "d");
        std::vector<DecoyEntry> entries;
        for (const auto& n : real_names) {
            real.put(n);
            materialized.put(n);
        }
        for (const auto& n : decoy_names) {
            materialized.put(n);
            entries.push_back(decoy("/home/alice/" + n, "secret"));
        }
        if (round % 2) real.put(".hidden"), materialized.put(".hidden");
        const auto overlay = OverlaySnapshot::from_entries(entries);
        auto ctx = context(overlay);
        ctx.pty_cols = std::uniform_int_distribution<int>(20, 200)(rng);
        const std::string ls = "COLUMNS=" + std::to_string(ctx.pty_cols) + " LC_ALL=C ls -C ";
        const auto truth = to_crlf(run_shell(ls + shell_quote(real.path.string())));
        const auto expected = to_crlf(run_shell(ls + shell_quote(materialized.path.string())));
        auto o = run("ls", truth, ctx);
        INFO("cols " << ctx.pty_cols);
        CHECK(o.result.concat() == expected);
        CHECK(o.events.empty());

        auto one = run("ls -1", to_crlf(run_shell("LC_ALL=C ls -1 " + shell_quote(real.path.string()))), ctx);
        CHECK(one.result.concat() == to_crlf(run_shell("LC_ALL=C ls -1 " + shell_quote(materialized.path.string()))));
    }
}

TEST_CASE("ls -l adds decoy rows and the total") {
    MockScript real = MockScript::standard();
    MockScript materialized = real;
    materialized.add_file("/home/alice/passwords.txt", kPasswords);
    materialized.files["/home/alice/passwords.txt"].mtime = real.now;
    MockShell real_shell(real);
    MockShell mat_shell(materialized);
    const auto overlay = OverlaySnapshot::from_entries({decoy("/home/alice/passwords.txt", kPasswords)});
    auto ctx = context(overlay, false);
    ctx.start_time = std::chrono::system_clock::from_time_t(real.now);
    ctx.now = ctx.start_time;
    for (const std::string line : {"ls -l", "ls -la", "ls -lh", "ls", "ls -a"}) {
        auto o = run(line, real_shell.exec(line), ctx);
        INFO(line);
        CHECK(o.result.concat() == mat_shell.exec(line));
    }
}

TEST_CASE("ls of a hidden path says it does not exist") {
    const auto overlay = standard_overlay();
    auto o = run("ls .bash_history", ".bash_history\r\n", context(overlay));
    CHECK(o.result.concat() == "ls: cannot access '.bash_history': No such file or directory\r\n");
}

TEST_CASE("with an empty overlay and no rules every command passes through unchanged") {
    const OverlaySnapshot empty;
    const auto ctx = context(empty);
    std::mt19937 rng(9);
    MockShell shell(MockScript::standard());
    for (int i = 0; i < 300; ++i) {
        const auto line = random_command(rng);
        const auto truth = to_crlf(shell.exec(line));
        const auto cmd = parse_command(line);
        const auto claim = route(cmd, {}, ctx);
        INFO(line);
        CHECK_FALSE(claim.claimed());
        CHECK(run_handler(claim, cmd, truth, {}, ctx).result.concat() == truth);
    }
}

TEST_CASE("rules: replace, block, alert") {
    const auto overlay = standard_overlay();
    const auto ctx = context(overlay);
    std::vector<DeceptionRule> rules = {rule("uname", RuleAction::ReplaceOutput, "Linux {{host}} as {{username}}"),
                                        rule("wget", RuleAction::Block, "wget: command not found"),
                                        rule("nc", RuleAction::AlertOnly)};

    auto uname = run("uname -a", "Linux mock 5.10\r\n", ctx, rules);
    CHECK(uname.result.concat() == "Linux mock as alice\r\n");

    const auto wget_cmd = parse_command("wget http://x");
    const auto wget = route(wget_cmd, rules, ctx);
    CHECK_FALSE(wget.send_to_host);
    REQUIRE(wget.events.size() == 1);
    CHECK(wget.events[0].kind == EventKind::SuspiciousCommand);
    CHECK(run_handler(wget, wget_cmd, "", {}, ctx).result.concat() == "\r\nwget: command not found\r\n");

    const auto nc_cmd = parse_command("nc -l 4444");
    const auto nc = route(nc_cmd, rules, ctx);
    CHECK_FALSE(nc.claimed());
    REQUIRE(nc.events.size() == 1);
    CHECK(nc.events[0].kind == EventKind::SuspiciousCommand);
    CHECK(run_handler(nc, nc_cmd, "listening\r\n", {}, ctx).result.concat() == "listening\r\n");

    DeceptionRule args = rule("curl", RuleAction::Block, "no");
    args.args = "evil\\.com";
    args.args_regex = std::regex(*args.args);
    CHECK(args.matches(parse_command("curl http://evil.com/x")));
    CHECK_FALSE(args.matches(parse_command("curl http://good.com/x")));
}

TEST_CASE("templates report unknown variables") {
    CHECK(unknown_template_variables("{{host}} {{nope}} {{cwd}} {{also}}") == std::vector<std::string>{"nope", "also"});
    const OverlaySnapshot empty;
    CHECK(render_template("{{username}}@{{host}}:{{cwd}} from {{client_ip}} {{home}}", context(empty)) ==
          "alice@mock:/home/alice from 10.0.0.9 /home/alice");
}

TEST_CASE("uname follows a /proc/version override") {
    const Bytes proc = "Linux version 4.19.0-6-amd64 (debian-kernel@lists.debian.org) (gcc version 8.3.0 (Debian "
                       "8.3.0-6)) #1 SMP Debian 4.19.67-2+deb10u2 (2019-11-11)\n";
    const auto k = parse_proc_version(proc);
    REQUIRE(k);
    CHECK(k->sysname == "Linux");
    CHECK(k->release == "4.19.0-6-amd64");
    CHECK(k->version == "#1 SMP Debian 4.19.67-2+deb10u2 (2019-11-11)");

    const auto overlay = OverlaySnapshot::from_entries({decoy("/proc/version", proc, DecoyMode::Override)});
    const auto ctx = context(overlay);
    MockShell shell(MockScript::standard());
    const auto cmd = parse_command("uname -a");
    const auto claim = route(cmd, {}, ctx);
    REQUIRE(claim.kind == HandlerKind::Uname);
    REQUIRE(claim.probes.size() == 1);
    const auto truth = to_crlf(shell.exec("uname -a"));
    const auto probe = to_crlf(shell.exec(claim.probes[0]));
    auto o = run_handler(claim, cmd, truth, {probe}, ctx);
    CHECK(o.result.concat() ==
          "Linux mock 4.19.0-6-amd64 #1 SMP Debian 4.19.67-2+deb10u2 (2019-11-11) x86_64 GNU/Linux\r\n");

    auto r = run_handler(route(parse_command("uname -r"), {}, ctx), parse_command("uname -r"),
                         to_crlf(shell.exec("uname -r")), {probe}, ctx);
    CHECK(r.result.concat() == "4.19.0-6-amd64\r\n");
}

TEST_CASE("ls option parsing") {
    auto o = parse_ls_options({"ls", "-la", "--color=auto", "/etc"});
    REQUIRE(o);
    CHECK(o->all);
    CHECK(o->long_format);
    CHECK(o->operands == std::vector<std::string>{"/etc"});
    CHECK_FALSE(parse_ls_options({"ls", "-R"}));
    CHECK_FALSE(parse_ls_options({"ls", "--sort=size"}));
}
