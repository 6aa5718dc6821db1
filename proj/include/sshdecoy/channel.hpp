#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>

#include "sshdecoy/bytes.hpp"

namespace sshdecoy {

// Ordered, reliable byte stream toward one peer.
class DuplexChannel {
public:
    virtual ~DuplexChannel() = default;

    // Blocks until bytes arrive. An empty result means the peer closed its
    // write side (or the channel was closed locally).
    virtual Bytes read() = 0;
    virtual void write(ByteView data) = 0;
    // Half-close: the peer's read() returns empty once buffered bytes drain.
    virtual void close_write() = 0;
    // Closes both directions and unblocks pending reads.
    virtual void close() = 0;
    // Terminal size change for PTY-backed channels; ignored elsewhere.
    virtual void resize(int /*cols*/, int /*rows*/) {}
    // Receives size changes requested by the peer.
    virtual void set_resize_handler(std::function<void(int, int)> /*handler*/) {}
};

// A channel of a remote process: stdout through read/write, plus stderr
// and an exit status.
class SessionChannel : public DuplexChannel {
public:
    // Blocks until stderr bytes arrive; empty at EOF.
    virtual Bytes read_stderr() { return {}; }
    virtual void write_stderr(ByteView /*data*/) {}
    virtual void send_exit_status(int /*status*/) {}
    // Known once the remote side reported it (at the latest when read() hits EOF).
    virtual std::optional<int> exit_status() const { return std::nullopt; }
    // Waits until the remote side closed the channel.
    virtual bool wait_closed(std::chrono::milliseconds /*timeout*/) { return true; }
};

// Unbounded blocking byte queue used by the in-memory channels.
class ByteQueue {
public:
    void push(ByteView data);
    void finish();  // no more pushes; readers drain then see EOF
    Bytes pop();    // empty at EOF

private:
    std::mutex mu_;
    std::condition_variable cv_;
    Bytes buf_;
    bool eof_ = false;
};

class PipeEndpoint final : public DuplexChannel {
public:
    PipeEndpoint(std::shared_ptr<ByteQueue> in, std::shared_ptr<ByteQueue> out) : in_(std::move(in)), out_(std::move(out)) {}

    Bytes read() override { return in_->pop(); }
    void write(ByteView data) override { out_->push(data); }
    void close_write() override { out_->finish(); }
    void close() override {
        out_->finish();
        in_->finish();
    }
    void resize(int cols, int rows) override;

    // Called with resize requests issued on the other endpoint.
    void set_resize_handler(std::function<void(int, int)> handler) override;

private:
    friend std::pair<std::unique_ptr<PipeEndpoint>, std::unique_ptr<PipeEndpoint>> make_pipe();
    std::shared_ptr<ByteQueue> in_;
    std::shared_ptr<ByteQueue> out_;
    std::shared_ptr<std::function<void(int, int)>> own_resize_ = std::make_shared<std::function<void(int, int)>>();
    std::shared_ptr<std::function<void(int, int)>> peer_resize_;
    std::shared_ptr<std::mutex> resize_mu_;
};

// Two connected in-memory endpoints: bytes written to one are read from the other.
std::pair<std::unique_ptr<PipeEndpoint>, std::unique_ptr<PipeEndpoint>> make_pipe();

}  // namespace sshdecoy
