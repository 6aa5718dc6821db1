#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "sshdecoy/decoy_overlay.hpp"
#include "temp_dir.hpp"

using namespace sshdecoy;
using sshdecoy::testing::TempDir;
namespace fs = std::filesystem;

namespace {

DecoyEntry add(const std::string& p, const std::string& c = "c") {
    DecoyEntry e;
    e.vpath = p;
    e.content = c;
    return e;
}

DecoyEntry hide(const std::string& p) {
    DecoyEntry e;
    e.vpath = p;
    e.mode = DecoyMode::Hide;
    return e;
}

}  // namespace

TEST_CASE("load maps root files to virtual paths") {
    TempDir add_root, hide_root;
    add_root.put("home/alice/passwords.txt", "admin:secret\n");
    add_root.put("proc/version.override", "Linux version 4.19.0\n");
    hide_root.put("etc/secret.conf");
    const auto snap = OverlaySnapshot::load(add_root.path, hide_root.path, {});
    const auto* p = snap.lookup("/home/alice/passwords.txt");
    REQUIRE(p);
    CHECK(p->mode == DecoyMode::Add);
    CHECK(p->content == "admin:secret\n");
    const auto* v = snap.lookup("/proc/version");
    REQUIRE(v);
    CHECK(v->mode == DecoyMode::Override);
    const auto* h = snap.lookup("/etc/secret.conf");
    REQUIRE(h);
    CHECK(h->mode == DecoyMode::Hide);
    CHECK(h->content.empty());
    CHECK(snap.lookup("/etc/hosts") == nullptr);
    CHECK(OverlaySnapshot::load({}, {}, {}).empty());
}

TEST_CASE("inline entries win over root files") {
    TempDir add_root;
    add_root.put("home/alice/passwords.txt", "from root");
    const auto snap = OverlaySnapshot::load(add_root.path, {}, {add("/home/alice/passwords.txt", "inline")});
    CHECK(snap.lookup("/home/alice/passwords.txt")->content == "inline");
}

TEST_CASE("load errors") {
    CHECK_THROWS_AS(OverlaySnapshot::load("/nonexistent/decoys", {}, {}), OverlayError);
    TempDir add_root, hide_root;
    add_root.put("etc/x.conf");
    hide_root.put("etc/x.conf");
    CHECK_THROWS_AS(OverlaySnapshot::load(add_root.path, hide_root.path, {}), OverlayError);
    CHECK_THROWS_AS(OverlaySnapshot::load({}, {}, {add("relative/path")}), OverlayError);
    CHECK_THROWS_AS(OverlaySnapshot::load({}, {}, {add("/a/b"), add("/a/b")}), OverlayError);
    // A decoy file cannot also be a decoy directory.
    CHECK_THROWS_AS(OverlaySnapshot::load({}, {}, {add("/a/b"), add("/a/b/c")}), OverlayError);
}

TEST_CASE("resolve") {
    CHECK(resolve("~/passwords.txt", "/tmp", "/home/alice") == "/home/alice/passwords.txt");
    CHECK(resolve("~", "/tmp", "/home/alice") == "/home/alice");
    CHECK(resolve("b.txt", "/tmp", "/home/alice") == "/tmp/b.txt");
    CHECK(resolve("../etc/./passwd", "/var", "/home/alice") == "/etc/passwd");
    CHECK(resolve("~bob/x", "/tmp", "/home/alice") == "~bob/x");
    CHECK(resolve("/../..//x/", "/", "/root") == "/x");
}

TEST_CASE("normalize_path agrees with std::filesystem lexical normalization") {
    std::mt19937 rng(3);
    const std::vector<std::string> parts = {"a", "b", "..", ".", "", "etc", "c.d"};
    for (int i = 0; i < 3000; ++i) {
        std::string p;
        for (int k = std::uniform_int_distribution<int>(1, 7)(rng); k > 0; --k)
            p += "/" + parts[std::uniform_int_distribution<std::size_t>(0, parts.size() - 1)(rng)];
        std::string ref = fs::path(p).lexically_normal().generic_string();
        // lexically_normal keeps a trailing separator and leading "/.." that the shell drops.
        while (ref.size() > 1 && ref.back() == '/') ref.pop_back();
        while (ref.rfind("/..", 0) == 0 && (ref.size() == 3 || ref[3] == '/')) ref = ref.size() == 3 ? "/" : ref.substr(3);
        REQUIRE_MESSAGE(normalize_path(p) == ref, p);
        REQUIRE(normalize_path(normalize_path(p)) == normalize_path(p));
    }
}

TEST_CASE("list_dir and complete") {
    const auto snap =
        OverlaySnapshot::from_entries({add("/home/alice/passwords.txt"), add("/home/alice/db.conf"),
                                       hide("/home/alice/b.txt"), add("/home/alice/sub/deep.txt"), add("/pass.txt")});
    const DirListing l = snap.list_dir("/home/alice");
    CHECK(l.adds == std::vector<std::string>{"db.conf", "passwords.txt"});
    CHECK(l.hides == std::set<std::string>{"b.txt"});
    CHECK(snap.list_dir("/var").empty());
    CHECK(snap.complete("/home/alice", "pass") == std::vector<std::string>{"passwords.txt"});
    CHECK(snap.complete("/home/alice", "zzz").empty());
    CHECK(snap.complete("/home/alice", "") == std::vector<std::string>{"db.conf", "passwords.txt"});
}

TEST_CASE("list_dir and complete agree with brute force over random snapshots") {
    std::mt19937 rng(17);
    const std::vector<std::string> dirs = {"/", "/a", "/a/b", "/c"};
    const std::vector<std::string> names = {"x", "xy", "xyz", "y", "Y", "a.txt", "b", ".hid"};
    for (int iter = 0; iter < 300; ++iter) {
        std::map<std::string, DecoyEntry> chosen;
        for (int k = std::uniform_int_distribution<int>(0, 12)(rng); k > 0; --k) {
            const std::string& d = dirs[std::uniform_int_distribution<std::size_t>(0, dirs.size() - 1)(rng)];
            const std::string& n = names[std::uniform_int_distribution<std::size_t>(0, names.size() - 1)(rng)];
            const std::string p = (d == "/" ? "" : d) + "/" + n;
            if (p == "/a" || p == "/c" || p == "/a/b") continue;  // would shadow a directory
            const int m = std::uniform_int_distribution<int>(0, 2)(rng);
            DecoyEntry e = m == 2 ? hide(p) : add(p);
            if (m == 1) e.mode = DecoyMode::Override;
            chosen[p] = e;
        }
        std::vector<DecoyEntry> entries;
        for (auto& [p, e] : chosen) entries.push_back(e);
        const auto snap = OverlaySnapshot::from_entries(entries);
        for (const auto& d : dirs) {
            std::vector<std::string> adds;
            std::set<std::string> hides, overrides;
            for (auto& [p, e] : chosen) {
                if (parent_dir(p) != d) continue;
                const std::string n = p.substr(p.rfind('/') + 1);
                if (e.mode == DecoyMode::Add) adds.push_back(n);
                else if (e.mode == DecoyMode::Hide) hides.insert(n);
                else overrides.insert(n);
            }
            std::sort(adds.begin(), adds.end());
            const DirListing l = snap.list_dir(d);
            CHECK(l.adds == adds);
            CHECK(l.hides == hides);
            CHECK(l.overrides == overrides);
            for (const std::string frag : {"", "x", "xy", "Y", "."}) {
                for (const auto& name : snap.complete(d, frag)) {
                    CHECK(name.rfind(frag, 0) == 0);
                    const auto* e = snap.lookup((d == "/" ? "" : d) + "/" + name);
                    REQUIRE(e);
                    CHECK(e->mode != DecoyMode::Hide);
                }
            }
        }
    }
}
