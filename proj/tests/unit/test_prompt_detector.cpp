#include <doctest.h>

#include <random>

#include "generators.hpp"
#include "sshdecoy/mock_host.hpp"
#include "sshdecoy/prompt_detector.hpp"

using namespace sshdecoy;
using namespace sshdecoy::testing;

TEST_CASE("prompt at the end of a buffer") {
    const auto p = PromptPattern::generic();
    const auto m = ends_with_prompt("output\r\nuser@web01:~$ ", p);
    REQUIRE(m);
    CHECK(m->text == "user@web01:~$ ");
    CHECK(m->raw_begin == 8);
    CHECK(ends_with_prompt("output\r\nroot@web01:/etc# ", p));
    CHECK_FALSE(ends_with_prompt("user@web01:~$ ls\r\npartial out", p));
    CHECK_FALSE(ends_with_prompt("user@web01:~$", p));  // trailing space required
    CHECK_FALSE(ends_with_prompt("root@web01:/etc# ", PromptPattern::generic("$")));
}

TEST_CASE("prompts are matched on style-stripped text") {
    const auto p = PromptPattern::generic();
    const Bytes colored = "x\r\n\x1b[01;32malice@mock\x1b[00m:\x1b[01;34m~/docs\x1b[00m$ ";
    const auto m = ends_with_prompt(colored, p);
    REQUIRE(m);
    CHECK(m->raw_begin == 3);
    CHECK(m->text == "alice@mock:~/docs$ ");
}

TEST_CASE("ends_with_prompt is pure") {
    const auto p = PromptPattern::generic();
    const Bytes buf = "a\r\nbob@h:/tmp$ ";
    const auto a = ends_with_prompt(buf, p);
    const auto b = ends_with_prompt(buf, p);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a->raw_begin == b->raw_begin);
    CHECK(a->text == b->text);
}

TEST_CASE("learn_prompt specializes user and host but not the path") {
    MockScript s = MockScript::standard();
    s.hostname = "db01";
    MockShell sh(s);
    const PromptPattern p = learn_prompt(sh.start(), "alice");
    CHECK(ends_with_prompt("alice@db01:~$ ", p));
    CHECK(ends_with_prompt("alice@db01:/var/log$ ", p));
    CHECK_FALSE(ends_with_prompt("bob@db01:~$ ", p));
    CHECK_FALSE(ends_with_prompt("alice@web:~$ ", p));

    s.username = "root";
    s.home = "/root";
    s.terminator = '#';
    MockShell root(s);
    const PromptPattern rp = learn_prompt(root.start(), "root");
    CHECK(ends_with_prompt("root@db01:/etc# ", rp));
    CHECK_FALSE(ends_with_prompt("root@db01:/etc$ ", rp));

    CHECK_THROWS_AS(learn_prompt("Welcome\r\nno prompt here\r\n", "alice"), NoPromptFound);
}

TEST_CASE("detector fires once per executed command on mock transcripts") {
    std::mt19937 rng(99);
    for (int session = 0; session < 20; ++session) {
        MockShell sh(MockScript::standard());
        const auto pattern = PromptPattern::generic();
        Bytes buffer;
        int fired = 0;
        auto observe = [&](ByteView out) {
            // Deliver in random chunks, testing after each.
            for (std::size_t i = 0; i < out.size();) {
                const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 64)(rng);
                buffer.append(out.substr(i, n));
                i += n;
                if (ends_with_prompt(buffer, pattern)) {
                    ++fired;
                    buffer.clear();
                }
            }
        };
        observe(sh.start());
        Millis now{0};
        for (int i = 0; i < 40; ++i) {
            const std::string cmd = random_command(rng);
            for (char c : cmd) observe(sh.feed(std::string(1, c), now += Millis(5)));
            observe(sh.feed("\r", now += Millis(5)));
        }
        CHECK(fired == static_cast<int>(sh.executed().size()) + 1);
    }
}

TEST_CASE("prompt-lookalike output is a known false positive") {
    MockShell sh(MockScript::standard());
    sh.start();
    const Bytes out = sh.feed("vimlike\r", Millis(1));
    // The program prints a prompt-shaped line while still running.
    CHECK(ends_with_prompt(out, PromptPattern::generic()));
    CHECK(sh.executed().size() == 1);
}
