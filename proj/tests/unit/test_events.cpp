#include <doctest.h>
#include <sqlite3.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <thread>

#include "sshdecoy/events.hpp"
#include "temp_dir.hpp"

using namespace sshdecoy;
using namespace sshdecoy::testing;

namespace {

const std::vector<EventKind> kAllKinds = {EventKind::CredentialHoney, EventKind::DecoyAccess, EventKind::SuspiciousCommand,
                                          EventKind::Blocked,         EventKind::PipelineEscape, EventKind::LsEscape,
                                          EventKind::Degraded,        EventKind::SessionOpen, EventKind::SessionClose};

DeceptionEvent random_event(std::mt19937& rng) {
    auto text = [&](std::size_t max) {
        std::string s;
        const std::size_t n = rng() % (max + 1);
        for (std::size_t i = 0; i < n; ++i) s += static_cast<char>(rng() % 256);
        return s;
    };
    DeceptionEvent e;
    e.ts = Timestamp(std::chrono::milliseconds(1600000000000LL + static_cast<long long>(rng() % 2000000000000ULL)));
    e.session_id = new_session_id();
    e.client_ip = std::to_string(rng() % 256) + ".0.0." + std::to_string(rng() % 256);
    e.username = "user" + std::to_string(rng() % 100);
    e.kind = kAllKinds[rng() % kAllKinds.size()];
    std::string detail = text(40);
    for (auto& c : detail) c = static_cast<char>(0x20 + static_cast<unsigned char>(c) % 0x5f);
    e.detail = detail;
    e.evidence = text(64);
    return e;
}

class ThrowingSink final : public EventSink {
public:
    void append(const DeceptionEvent&) override { throw std::runtime_error("down"); }
    std::string describe() const override { return "throwing"; }
};

std::string hex(ByteView b) {
    static const char* d = "0123456789abcdef";
    std::string out;
    for (unsigned char c : b) {
        out += d[c >> 4];
        out += d[c & 15];
    }
    return out;
}

}  // namespace

TEST_CASE("event kinds round-trip through their names") {
    for (auto k : kAllKinds) CHECK(event_kind_from_string(to_string(k)) == k);
    CHECK_FALSE(event_kind_from_string("Nope"));
}

TEST_CASE("timestamps use UTC ISO-8601 with milliseconds") {
    const Timestamp ts(std::chrono::milliseconds(1634385600123LL));
    CHECK(format_timestamp(ts) == "2021-10-16T12:00:00.123Z");
    CHECK(parse_timestamp("2021-10-16T12:00:00.123Z") == ts);
    CHECK_FALSE(parse_timestamp("2021-10-16 12:00:00"));
}

TEST_CASE("serialize then deserialize is the identity") {
    std::mt19937 rng(1);
    for (int i = 0; i < 2000; ++i) {
        const auto e = random_event(rng);
        const auto line = serialize_event(e);
        CHECK(line.find('\n') == std::string::npos);
        CHECK(deserialize_event(line) == e);
    }
}

TEST_CASE("serialized events are plain JSON objects") {
    std::mt19937 rng(2);
    for (int i = 0; i < 200; ++i) {
        const auto e = random_event(rng);
        const auto j = nlohmann::json::parse(serialize_event(e));
        CHECK(j.at("ts") == format_timestamp(e.ts));
        CHECK(j.at("session_id") == e.session_id);
        CHECK(j.at("client_ip") == e.client_ip);
        CHECK(j.at("username") == e.username);
        CHECK(j.at("kind") == to_string(e.kind));
        CHECK(j.at("detail") == e.detail);
        CHECK(j.at("evidence") == hex(e.evidence));
    }
    CHECK_THROWS_AS(deserialize_event("{"), std::invalid_argument);
    CHECK_THROWS_AS(deserialize_event(R"({"ts":"x"})"), std::invalid_argument);
}

TEST_CASE("file sink writes one line per event") {
    TempDir dir;
    const auto path = dir.path / "events.jsonl";
    std::mt19937 rng(3);
    std::vector<DeceptionEvent> written;
    {
        FileSink sink(path);
        for (int i = 0; i < 50; ++i) {
            written.push_back(random_event(rng));
            sink.append(written.back());
        }
    }
    std::ifstream in(path);
    std::string line;
    std::vector<DeceptionEvent> read;
    while (std::getline(in, line)) read.push_back(deserialize_event(line));
    CHECK(read == written);
}

TEST_CASE("sqlite sink rows read back through the C API") {
    TempDir dir;
    const auto db_path = (dir.path / "events.db").string();
    std::mt19937 rng(4);
    std::vector<DeceptionEvent> written;
    {
        SqliteSink sink(db_path);
        for (int i = 0; i < 30; ++i) {
            written.push_back(random_event(rng));
            sink.append(written.back());
        }
    }
    sqlite3* db = nullptr;
    REQUIRE(sqlite3_open(db_path.c_str(), &db) == SQLITE_OK);
    sqlite3_stmt* st = nullptr;
    REQUIRE(sqlite3_prepare_v2(db,
                               "SELECT ts, session_id, client_ip, username, kind, detail, evidence "
                               "FROM deception_events ORDER BY id",
                               -1, &st, nullptr) == SQLITE_OK);
    std::size_t i = 0;
    auto col = [&](int c) {
        return std::string(reinterpret_cast<const char*>(sqlite3_column_text(st, c)),
                           static_cast<std::size_t>(sqlite3_column_bytes(st, c)));
    };
    while (sqlite3_step(st) == SQLITE_ROW) {
        REQUIRE(i < written.size());
        const auto& e = written[i++];
        CHECK(col(0) == format_timestamp(e.ts));
        CHECK(col(1) == e.session_id);
        CHECK(col(2) == e.client_ip);
        CHECK(col(3) == e.username);
        CHECK(col(4) == to_string(e.kind));
        CHECK(col(5) == e.detail);
        CHECK(col(6) == hex(e.evidence));
    }
    CHECK(i == written.size());
    sqlite3_finalize(st);
    sqlite3_close(db);
}

TEST_CASE("the shipped schema file matches the sink's schema") {
    std::ifstream in(SSHDECOY_SCHEMA);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == SqliteSink::schema());
}

TEST_CASE("blocklist policy") {
    DeceptionEvent honey;
    honey.kind = EventKind::CredentialHoney;
    honey.client_ip = "10.0.0.1";
    DeceptionEvent access = honey;
    access.kind = EventKind::DecoyAccess;
    access.client_ip = "10.0.0.2";
    DeceptionEvent other = honey;
    other.kind = EventKind::SuspiciousCommand;
    other.client_ip = "10.0.0.3";

    BlockState manual{BlockPolicy::Manual, {"10.9.9.9"}};
    for (const auto& e : {honey, access, other}) {
        const auto next = on_event_update_blocklist(e, manual);
        CHECK(next.blocked == manual.blocked);
    }
    CHECK_FALSE(is_eligible("10.9.9.9", manual));
    CHECK(is_eligible("10.0.0.1", manual));

    BlockState automatic{BlockPolicy::AutoOnHoney, {}};
    automatic = on_event_update_blocklist(honey, automatic);
    automatic = on_event_update_blocklist(access, automatic);
    automatic = on_event_update_blocklist(other, automatic);
    CHECK(automatic.blocked == std::set<std::string>{"10.0.0.1", "10.0.0.2"});
    CHECK(on_event_update_blocklist(honey, automatic).blocked == automatic.blocked);
}

TEST_CASE("the recorder survives failing sinks") {
    auto rec = std::make_shared<EventRecorder>();
    auto mem = std::make_shared<MemorySink>();
    rec->add_sink(std::make_shared<ThrowingSink>());
    rec->add_sink(mem);
    SessionEvents ev(rec, "s", "1.2.3.4");
    ev.record(EventKind::DecoyAccess, "/x");
    CHECK(mem->events().size() == 1);
    CHECK(rec->degraded_count() == 1);
    CHECK(rec->ring().empty());

    mem->set_failing(true);
    for (std::size_t i = 0; i < EventRecorder::kRingCapacity + 5; ++i) ev.record(EventKind::DecoyAccess, std::to_string(i));
    const auto ring = rec->ring();
    REQUIRE(ring.size() == EventRecorder::kRingCapacity);
    CHECK(ring.front().detail == "5");
    CHECK(ring.back().detail == std::to_string(EventRecorder::kRingCapacity + 4));
}

TEST_CASE("honey events reach the blocklist and the hook") {
    auto bl = std::make_shared<BlockList>(BlockState{BlockPolicy::AutoOnHoney, {}});
    auto rec = std::make_shared<EventRecorder>(bl);
    int hooked = 0;
    rec->set_honey_hook([&](const DeceptionEvent&) { ++hooked; });
    SessionEvents ev(rec, "s", "10.1.1.1");
    CHECK(bl->is_eligible("10.1.1.1"));
    ev.record(EventKind::CredentialHoney, "honey credential admin:x");
    CHECK_FALSE(bl->is_eligible("10.1.1.1"));
    CHECK(hooked == 1);
}

TEST_CASE("session timestamps never go backwards and concurrent sessions keep their attribution") {
    auto rec = std::make_shared<EventRecorder>();
    auto mem = std::make_shared<MemorySink>();
    rec->add_sink(mem);
    constexpr int kSessions = 8;
    constexpr int kEach = 300;
    std::vector<std::thread> threads;
    for (int s = 0; s < kSessions; ++s) {
        threads.emplace_back([&, s] {
            SessionEvents ev(rec, "session" + std::to_string(s), "10.0.0." + std::to_string(s));
            ev.set_username("user" + std::to_string(s));
            for (int i = 0; i < kEach; ++i) ev.record(EventKind::DecoyAccess, std::to_string(i));
        });
    }
    for (auto& t : threads) t.join();
    const auto events = mem->events();
    CHECK(events.size() == kSessions * kEach);
    std::map<std::string, std::vector<DeceptionEvent>> by_session;
    for (const auto& e : events) by_session[e.session_id].push_back(e);
    for (int s = 0; s < kSessions; ++s) {
        const auto& list = by_session["session" + std::to_string(s)];
        REQUIRE(list.size() == kEach);
        for (int i = 0; i < kEach; ++i) {
            CHECK(list[i].detail == std::to_string(i));
            CHECK(list[i].username == "user" + std::to_string(s));
            CHECK(list[i].client_ip == "10.0.0." + std::to_string(s));
            if (i) CHECK(list[i].ts >= list[i - 1].ts);
        }
    }
}
