#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "sshdecoy/channel.hpp"
#include "sshdecoy/ssh/transport.hpp"

namespace sshdecoy::ssh {

struct ChannelRequest {
    std::string type;
    bool want_reply = false;
    Bytes data;  // type-specific fields
};

class Connection;

// One "session" channel of the connection protocol.
class Channel final : public SessionChannel {
public:
    Channel(Connection& conn, std::uint32_t local_id);

    Bytes read() override;
    void write(ByteView data) override;
    void close_write() override;
    void close() override;
    void resize(int cols, int rows) override;  // sends window-change
    Bytes read_stderr() override;
    void write_stderr(ByteView data) override;
    void send_exit_status(int status) override;
    std::optional<int> exit_status() const override;
    // window-change requests from the peer.
    void set_resize_handler(std::function<void(int, int)> handler) override;

    // Sends a request and, when want_reply, waits for the answer.
    bool request(const std::string& type, ByteView data, bool want_reply = true);
    bool request_pty(const std::string& term, int cols, int rows);
    bool request_shell() { return request("shell", {}); }
    bool request_exec(const std::string& command);
    bool request_subsystem(const std::string& name);
    // Called on the connection thread for each incoming request; the return
    // value is the reply when one is wanted.
    void set_request_handler(std::function<bool(const ChannelRequest&)> handler);
    bool wait_closed(std::chrono::milliseconds timeout) override;

private:
    friend class Connection;
    void send_data(ByteView data, std::optional<std::uint32_t> ext);

    Connection& conn_;
    const std::uint32_t local_id_;
    std::uint32_t remote_id_ = 0;
    std::uint32_t remote_max_packet_ = 32768;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::uint64_t remote_window_ = 0;
    std::uint64_t local_window_ = 0;
    bool open_ = false;
    bool open_failed_ = false;
    bool eof_sent_ = false;
    bool close_sent_ = false;
    bool close_received_ = false;
    bool dead_ = false;
    std::optional<int> exit_status_;
    std::deque<std::optional<bool>> replies_;  // pending request replies, oldest first
    std::function<bool(const ChannelRequest&)> handler_;
    std::function<void(int, int)> resize_handler_;

    ByteQueue out_;
    ByteQueue err_;
};

// Channel multiplexing over a transport. run() is the receive loop.
class Connection {
public:
    static constexpr std::uint32_t kWindow = 2 * 1024 * 1024;
    static constexpr std::uint32_t kMaxPacket = 32768;

    explicit Connection(Transport& transport);
    ~Connection();

    // Incoming "session" opens; return false to refuse.
    void set_open_handler(std::function<bool(std::shared_ptr<Channel>)> handler);
    void run();
    std::shared_ptr<Channel> open_session(std::chrono::milliseconds timeout = std::chrono::seconds(30));
    void send(ByteView payload);
    bool alive() const { return alive_; }
    Transport& transport() { return transport_; }

private:
    friend class Channel;
    void dispatch(const Bytes& payload);
    std::shared_ptr<Channel> find(std::uint32_t id);
    void forget(std::uint32_t id);
    void finish();

    Transport& transport_;
    std::mutex mu_;
    std::map<std::uint32_t, std::shared_ptr<Channel>> channels_;
    std::uint32_t next_id_ = 0;
    std::function<bool(std::shared_ptr<Channel>)> open_handler_;
    std::atomic<bool> alive_{true};
};

}  // namespace sshdecoy::ssh
