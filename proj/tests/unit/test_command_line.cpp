#include <doctest.h>

#include <random>

#include "sshdecoy/command_line.hpp"

using namespace sshdecoy;

TEST_CASE("simple commands and pipelines") {
    auto c = parse_command("cat ~/passwords.txt | grep admin");
    REQUIRE(c.pipeline.size() == 2);
    CHECK_FALSE(c.complex);
    CHECK(c.first().argv() == std::vector<std::string>{"cat", "~/passwords.txt"});
    CHECK(c.first().words[1].tilde);
    CHECK(c.pipeline[1].argv() == std::vector<std::string>{"grep", "admin"});
    CHECK(c.raw == "cat ~/passwords.txt | grep admin");
}

TEST_CASE("quotes and escapes are removed and remembered") {
    auto c = parse_command(R"(grep -e 'a b' "c d" e\ f)");
    REQUIRE(c.pipeline.size() == 1);
    CHECK(c.first().argv() == std::vector<std::string>{"grep", "-e", "a b", "c d", "e f"});
    CHECK(c.first().words[2].quoted);
    CHECK(c.first().words[4].quoted);
    CHECK_FALSE(c.first().words[1].quoted);
    CHECK(parse_command("echo '~'").first().words[1].tilde == false);
}

TEST_CASE("globs and expansions are not literal") {
    auto c = parse_command(R"(cat *.txt "$HOME/x" '$HOME' a?c)");
    const auto& w = c.first().words;
    CHECK(w[1].glob);
    CHECK(w[2].expansion);
    CHECK(w[3].literal());
    CHECK(w[4].glob);
    CHECK(parse_command("echo '*'").first().words[1].literal());
}

TEST_CASE("redirections") {
    auto c = parse_command("cat decoy > out 2>&1 < in");
    const auto& r = c.first().redirections;
    REQUIRE(r.size() == 3);
    CHECK(r[0].fd == 1);
    CHECK(r[0].op == ">");
    CHECK(r[0].target.text == "out");
    CHECK(r[1].fd == 2);
    CHECK(r[1].op == ">&");
    CHECK(r[1].target.text == "1");
    CHECK(r[2].op == "<");
    CHECK_FALSE(r[2].writes());
    CHECK(c.first().argv() == std::vector<std::string>{"cat", "decoy"});
}

TEST_CASE("lists, substitutions and unfinished input are complex") {
    for (const char* line : {"ls; cat x", "ls && id", "ls || id", "echo $(id)", "echo `id`", "(ls)", "cat <<EOF",
                             "echo 'open", "ls \\", "sleep 1 &"}) {
        INFO(line);
        CHECK(parse_command(line).complex);
    }
    CHECK(parse_command("").empty());
    CHECK(parse_command("   ").empty());
}

TEST_CASE("requote reads back the same word") {
    std::mt19937 rng(8);
    const std::string alphabet = "ab ~*?[]$'\"\\|;&<>()#\t-=.";
    for (int i = 0; i < 3000; ++i) {
        std::string text;
        const int n = static_cast<int>(rng() % 10) + 1;
        for (int k = 0; k < n; ++k) text += alphabet[rng() % alphabet.size()];
        Word w;
        w.text = text;
        const std::string q = requote(w);
        const auto back = parse_command("x " + q);
        INFO(text << " -> " << q);
        REQUIRE(back.pipeline.size() == 1);
        REQUIRE(back.first().words.size() == 2);
        CHECK(back.first().words[1].text == text);
        CHECK(back.first().words[1].literal());
    }
}

TEST_CASE("rejoin is stable") {
    for (const char* line : {"cat  a   b|grep  x", "head -n 2 'my file'", "ls -la /etc"}) {
        const auto once = parse_command(line).rejoin();
        CHECK(parse_command(once).rejoin() == once);
    }
    CHECK(parse_command("cat  a   b|grep  x").rejoin() == "cat a b | grep x");
}
