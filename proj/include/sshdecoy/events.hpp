#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sshdecoy/bytes.hpp"

struct sqlite3;

namespace sshdecoy {

enum class EventKind {
    CredentialHoney,
    DecoyAccess,
    SuspiciousCommand,
    Blocked,
    PipelineEscape,
    LsEscape,
    Degraded,
    SessionOpen,
    SessionClose,
};

const char* to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);

using Clock = std::chrono::system_clock;
using Timestamp = std::chrono::time_point<Clock, std::chrono::milliseconds>;

Timestamp now_ms();
std::string format_timestamp(Timestamp ts);          // 2026-10-16T08:15:02.123Z
std::optional<Timestamp> parse_timestamp(std::string_view text);

struct DeceptionEvent {
    Timestamp ts{};
    std::string session_id;
    std::string client_ip;
    std::string username;
    EventKind kind = EventKind::SessionOpen;
    std::string detail;
    Bytes evidence;

    bool operator==(const DeceptionEvent&) const = default;
};

// One JSON object per line with the fields ts, session_id, client_ip,
// username, kind, detail, evidence (hex).
std::string serialize_event(const DeceptionEvent& event);
// Throws std::invalid_argument on malformed input.
DeceptionEvent deserialize_event(std::string_view line);

class EventSink {
public:
    virtual ~EventSink() = default;
    virtual void append(const DeceptionEvent& event) = 0;
    virtual std::string describe() const = 0;
};

class FileSink final : public EventSink {
public:
    explicit FileSink(std::filesystem::path path);
    void append(const DeceptionEvent& event) override;
    std::string describe() const override { return "file:" + path_.string(); }

private:
    std::filesystem::path path_;
    std::mutex mu_;
    std::ofstream out_;
};

class MemorySink final : public EventSink {
public:
    void append(const DeceptionEvent& event) override;
    std::string describe() const override { return "memory"; }
    std::vector<DeceptionEvent> events() const;
    void set_failing(bool failing);

private:
    mutable std::mutex mu_;
    std::vector<DeceptionEvent> events_;
    bool failing_ = false;
};

// Writes one row per event into table deception_events of a SQLite database.
class SqliteSink final : public EventSink {
public:
    explicit SqliteSink(const std::string& database);
    ~SqliteSink() override;
    SqliteSink(const SqliteSink&) = delete;
    SqliteSink& operator=(const SqliteSink&) = delete;

    void append(const DeceptionEvent& event) override;
    std::string describe() const override { return "sqlite:" + database_; }

    static const char* schema();

private:
    std::string database_;
    std::mutex mu_;
    ::sqlite3* db_ = nullptr;
};

enum class BlockPolicy { Manual, AutoOnHoney };

// Value-level blocklist state; the free functions below are pure.
struct BlockState {
    BlockPolicy policy = BlockPolicy::Manual;
    std::set<std::string> blocked;
};

bool is_eligible(const std::string& ip, const BlockState& state);
BlockState on_event_update_blocklist(const DeceptionEvent& event, BlockState state);

// Thread-safe blocklist shared by all sessions of one proxy run.
class BlockList {
public:
    explicit BlockList(BlockState initial = {}) : state_(std::move(initial)) {}
    bool is_eligible(const std::string& ip) const;
    void observe(const DeceptionEvent& event);
    void block(const std::string& ip);
    BlockState snapshot() const;

private:
    mutable std::mutex mu_;
    BlockState state_;
};

// Fans events out to every sink. A failing sink never propagates to the
// session; when every sink fails the event lands in a bounded in-memory ring.
class EventRecorder {
public:
    static constexpr std::size_t kRingCapacity = 1000;

    explicit EventRecorder(std::shared_ptr<BlockList> blocklist = nullptr);

    void add_sink(std::shared_ptr<EventSink> sink);
    void record(DeceptionEvent event);

    // Invoked after a CredentialHoney event is recorded. Redirecting the
    // attacker elsewhere is not implemented; the hook is a no-op by default.
    void set_honey_hook(std::function<void(const DeceptionEvent&)> hook);

    std::size_t degraded_count() const;
    std::vector<DeceptionEvent> ring() const;
    BlockList* blocklist() const { return blocklist_.get(); }

private:
    mutable std::mutex mu_;
    std::vector<std::shared_ptr<EventSink>> sinks_;
    std::shared_ptr<BlockList> blocklist_;
    std::function<void(const DeceptionEvent&)> honey_hook_;
    std::size_t degraded_ = 0;
    std::deque<DeceptionEvent> ring_;
};

// Per-session event stamping: timestamps never go backwards within a session.
// Safe to share between the channels of one connection.
class SessionEvents {
public:
    SessionEvents(std::shared_ptr<EventRecorder> recorder, std::string session_id, std::string client_ip);

    void set_username(std::string username) {
        std::lock_guard lock(mu_);
        username_ = std::move(username);
    }
    const std::string& session_id() const { return session_id_; }
    const std::string& client_ip() const { return client_ip_; }
    const std::string& username() const { return username_; }

    void record(EventKind kind, std::string detail, Bytes evidence = {});

private:
    std::shared_ptr<EventRecorder> recorder_;
    std::string session_id_;
    std::string client_ip_;
    std::string username_;
    std::mutex mu_;
    Timestamp last_{};
};

std::string new_session_id();

}  // namespace sshdecoy
