#include "sshdecoy/events.hpp"

#include <sqlite3.h>

#include <atomic>
#include <cstdio>
#include <ctime>
#include <random>

#include <nlohmann/json.hpp>

namespace sshdecoy {

using nlohmann::json;

const char* to_string(EventKind kind) {
    switch (kind) {
    case EventKind::CredentialHoney: return "CredentialHoney";
    case EventKind::DecoyAccess: return "DecoyAccess";
    case EventKind::SuspiciousCommand: return "SuspiciousCommand";
    case EventKind::Blocked: return "Blocked";
    case EventKind::PipelineEscape: return "PipelineEscape";
    case EventKind::LsEscape: return "LsEscape";
    case EventKind::Degraded: return "Degraded";
    case EventKind::SessionOpen: return "SessionOpen";
    case EventKind::SessionClose: return "SessionClose";
    }
    return "?";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
    for (int k = 0; k <= static_cast<int>(EventKind::SessionClose); ++k) {
        const auto kind = static_cast<EventKind>(k);
        if (name == to_string(kind)) return kind;
    }
    return std::nullopt;
}

Timestamp now_ms() { return std::chrono::time_point_cast<std::chrono::milliseconds>(Clock::now()); }

std::string format_timestamp(Timestamp ts) {
    const auto ms = ts.time_since_epoch().count();
    long long secs = ms / 1000;
    long long frac = ms % 1000;
    if (frac < 0) {
        frac += 1000;
        --secs;
    }
    const std::time_t t = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03lldZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
    return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    std::tm tm{};
    int ms = 0;
    char z = 0;
    const std::string s(text);
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3d%c", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                    &tm.tm_min, &tm.tm_sec, &ms, &z) != 8 ||
        z != 'Z' || s.size() != 24)
        return std::nullopt;
    tm.tm_year -= 1900;
    tm.tm_mon -= 1;
    const std::time_t secs = timegm(&tm);
    return Timestamp(std::chrono::milliseconds(static_cast<long long>(secs) * 1000 + ms));
}

std::string serialize_event(const DeceptionEvent& e) {
    json j;
    j["ts"] = format_timestamp(e.ts);
    j["session_id"] = e.session_id;
    j["client_ip"] = e.client_ip;
    j["username"] = e.username;
    j["kind"] = to_string(e.kind);
    j["detail"] = e.detail;
    j["evidence"] = hex_encode(e.evidence);
    // Field text may carry arbitrary bytes; replace invalid UTF-8 rather than throw.
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

DeceptionEvent deserialize_event(std::string_view line) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& err) {
        throw std::invalid_argument(std::string("event line is not JSON: ") + err.what());
    }
    auto field = [&](const char* name) -> std::string {
        if (!j.contains(name) || !j[name].is_string()) throw std::invalid_argument(std::string("missing field ") + name);
        return j[name].get<std::string>();
    };
    DeceptionEvent e;
    const auto ts = parse_timestamp(field("ts"));
    if (!ts) throw std::invalid_argument("bad timestamp");
    e.ts = *ts;
    e.session_id = field("session_id");
    e.client_ip = field("client_ip");
    e.username = field("username");
    const auto kind = event_kind_from_string(field("kind"));
    if (!kind) throw std::invalid_argument("unknown event kind");
    e.kind = *kind;
    e.detail = field("detail");
    e.evidence = hex_decode(field("evidence"));
    return e;
}

// --- sinks ----------------------------------------------------------------

FileSink::FileSink(std::filesystem::path path) : path_(std::move(path)) {
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw std::runtime_error("cannot open event file " + path_.string());
}

void FileSink::append(const DeceptionEvent& event) {
    const std::string line = serialize_event(event) + "\n";
    std::lock_guard lock(mu_);
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw std::runtime_error("write to event file " + path_.string() + " failed");
}

void MemorySink::append(const DeceptionEvent& event) {
    std::lock_guard lock(mu_);
    if (failing_) throw std::runtime_error("memory sink set to fail");
    events_.push_back(event);
}

std::vector<DeceptionEvent> MemorySink::events() const {
    std::lock_guard lock(mu_);
    return events_;
}

void MemorySink::set_failing(bool failing) {
    std::lock_guard lock(mu_);
    failing_ = failing;
}

const char* SqliteSink::schema() {
    return "CREATE TABLE IF NOT EXISTS deception_events (\n"
           "    id INTEGER PRIMARY KEY AUTOINCREMENT,\n"
           "    ts TEXT NOT NULL,\n"
           "    session_id TEXT NOT NULL,\n"
           "    client_ip TEXT NOT NULL,\n"
           "    username TEXT NOT NULL,\n"
           "    kind TEXT NOT NULL,\n"
           "    detail TEXT NOT NULL,\n"
           "    evidence TEXT NOT NULL\n"
           ");\n";
}

SqliteSink::SqliteSink(const std::string& database) : database_(database) {
    if (sqlite3_open(database.c_str(), &db_) != SQLITE_OK) {
        std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        db_ = nullptr;
        throw std::runtime_error("cannot open event database " + database + ": " + msg);
    }
    char* err = nullptr;
    if (sqlite3_exec(db_, schema(), nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        sqlite3_close(db_);
        db_ = nullptr;
        throw std::runtime_error("cannot create deception_events: " + msg);
    }
}

SqliteSink::~SqliteSink() {
    if (db_) sqlite3_close(db_);
}

void SqliteSink::append(const DeceptionEvent& e) {
    std::lock_guard lock(mu_);
    sqlite3_stmt* stmt = nullptr;
    const char* sql =
        "INSERT INTO deception_events (ts, session_id, client_ip, username, kind, detail, evidence) "
        "VALUES (?, ?, ?, ?, ?, ?, ?)";
    if (sqlite3_prepare_v2(db_, sql, -1, &stmt, nullptr) != SQLITE_OK)
        throw std::runtime_error(std::string("sqlite prepare failed: ") + sqlite3_errmsg(db_));
    const std::string values[] = {format_timestamp(e.ts), e.session_id, e.client_ip, e.username,
                                  to_string(e.kind),      e.detail,     hex_encode(e.evidence)};
    for (int i = 0; i < 7; ++i)
        sqlite3_bind_text(stmt, i + 1, values[i].c_str(), static_cast<int>(values[i].size()), SQLITE_TRANSIENT);
    const int rc = sqlite3_step(stmt);
    sqlite3_finalize(stmt);
    if (rc != SQLITE_DONE) throw std::runtime_error(std::string("sqlite insert failed: ") + sqlite3_errmsg(db_));
}

// --- blocklist ------------------------------------------------------------

bool is_eligible(const std::string& ip, const BlockState& state) { return state.blocked.count(ip) == 0; }

BlockState on_event_update_blocklist(const DeceptionEvent& event, BlockState state) {
    if (state.policy == BlockPolicy::AutoOnHoney &&
        (event.kind == EventKind::CredentialHoney || event.kind == EventKind::DecoyAccess) && !event.client_ip.empty())
        state.blocked.insert(event.client_ip);
    return state;
}

bool BlockList::is_eligible(const std::string& ip) const {
    std::lock_guard lock(mu_);
    return sshdecoy::is_eligible(ip, state_);
}

void BlockList::observe(const DeceptionEvent& event) {
    std::lock_guard lock(mu_);
    state_ = on_event_update_blocklist(event, std::move(state_));
}

void BlockList::block(const std::string& ip) {
    std::lock_guard lock(mu_);
    state_.blocked.insert(ip);
}

BlockState BlockList::snapshot() const {
    std::lock_guard lock(mu_);
    return state_;
}

// --- recorder -------------------------------------------------------------

EventRecorder::EventRecorder(std::shared_ptr<BlockList> blocklist) : blocklist_(std::move(blocklist)) {}

void EventRecorder::add_sink(std::shared_ptr<EventSink> sink) {
    std::lock_guard lock(mu_);
    sinks_.push_back(std::move(sink));
}

void EventRecorder::set_honey_hook(std::function<void(const DeceptionEvent&)> hook) {
    std::lock_guard lock(mu_);
    honey_hook_ = std::move(hook);
}

void EventRecorder::record(DeceptionEvent event) {
    const bool lifecycle = event.kind == EventKind::SessionOpen || event.kind == EventKind::SessionClose;
    if (!lifecycle && event.detail.empty()) event.detail = to_string(event.kind);

    std::vector<std::shared_ptr<EventSink>> sinks;
    std::function<void(const DeceptionEvent&)> hook;
    {
        std::lock_guard lock(mu_);
        sinks = sinks_;
        hook = honey_hook_;
    }
    std::size_t ok = 0;
    std::size_t failed = 0;
    for (const auto& sink : sinks) {
        try {
            sink->append(event);
            ++ok;
        } catch (const std::exception&) {
            ++failed;
        }
    }
    {
        std::lock_guard lock(mu_);
        degraded_ += failed;
        if (ok == 0) {
            ring_.push_back(event);
            if (ring_.size() > kRingCapacity) ring_.pop_front();
        }
    }
    if (blocklist_) blocklist_->observe(event);
    if (event.kind == EventKind::CredentialHoney && hook) hook(event);
}

std::size_t EventRecorder::degraded_count() const {
    std::lock_guard lock(mu_);
    return degraded_;
}

std::vector<DeceptionEvent> EventRecorder::ring() const {
    std::lock_guard lock(mu_);
    return {ring_.begin(), ring_.end()};
}

SessionEvents::SessionEvents(std::shared_ptr<EventRecorder> recorder, std::string session_id, std::string client_ip)
    : recorder_(std::move(recorder)), session_id_(std::move(session_id)), client_ip_(std::move(client_ip)) {}

void SessionEvents::record(EventKind kind, std::string detail, Bytes evidence) {
    std::lock_guard lock(mu_);
    Timestamp ts = now_ms();
    if (ts < last_) ts = last_;
    last_ = ts;
    if (!recorder_) return;
    recorder_->record(DeceptionEvent{ts, session_id_, client_ip_, username_, kind, std::move(detail),
                                     std::move(evidence)});
}

std::string new_session_id() {
    static std::atomic<unsigned long long> counter{0};
    static const unsigned long long seed = std::random_device{}();
    const unsigned long long n = counter.fetch_add(1);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%08llx-%06llx", (seed ^ (seed >> 17)) & 0xffffffffULL, n & 0xffffffULL);
    return buf;
}

}  // namespace sshdecoy
