#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>

#include "sshdecoy/bytes.hpp"
#include "sshdecoy/config.hpp"

namespace sshdecoy {

struct NetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Owning TCP socket.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket();
    Socket(Socket&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    Socket& operator=(Socket&& o) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }
    // Returns 0 at EOF; throws NetError on failure.
    std::size_t read_some(char* buf, std::size_t n);
    void read_exact(char* buf, std::size_t n);
    void write_all(ByteView data);
    void shutdown_write();
    // Unblocks readers in other threads without releasing the descriptor.
    void shutdown_both();
    void close();
    std::string peer_ip() const;
    void set_read_timeout(std::chrono::milliseconds timeout);

private:
    int fd_ = -1;
};

Socket connect_tcp(const Endpoint& to, std::chrono::milliseconds timeout = std::chrono::seconds(10));

class Listener {
public:
    explicit Listener(const Endpoint& at);
    ~Listener();
    // Empty after close().
    std::optional<Socket> accept();
    int port() const { return port_; }
    void close();

private:
    int fd_ = -1;
    int port_ = 0;
};

}  // namespace sshdecoy
