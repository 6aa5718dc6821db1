#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "sshdecoy/ssh/connection.hpp"
#include "sshdecoy/ssh/transport.hpp"

namespace sshdecoy::ssh {

inline constexpr const char* kClientIdent = "SSH-2.0-OpenSSH_8.9p1";

enum class AuthVerdict { Accept, Reject, Disconnect };

// Server side of one connection: handshake, password authentication, then
// the connection protocol.
class ServerSession {
public:
    ServerSession(Socket socket, const HostKey& key, std::string ident);
    ~ServerSession();

    void handshake();
    // Password checks until one is accepted. Other methods are refused with
    // a failure that lists "password". Returns the accepted username.
    std::optional<std::string> authenticate(
        const std::function<AuthVerdict(const std::string& user, const std::string& password)>& check,
        int max_attempts = 6);
    Connection& connection() { return connection_; }
    // Receive loop; returns when the peer disconnects or close() is called.
    void run() { connection_.run(); }
    void close();
    std::string peer_ip() const { return transport_.peer_ip(); }
    const std::string& peer_ident() const { return transport_.peer_ident(); }

private:
    Transport transport_;
    Connection connection_;
};

struct ClientOptions {
    std::string ident = kClientIdent;
    // "SHA256:..." pin for the server's host key; empty accepts any key.
    std::string fingerprint;
    std::chrono::milliseconds timeout{10000};
};

struct AuthFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Client side: connect, authenticate with a password, open channels.
class Client {
public:
    // Throws NetError, ProtocolError or Disconnected.
    static std::unique_ptr<Client> connect(const Endpoint& to, const ClientOptions& options = {});
    ~Client();

    // Throws AuthFailed when the server rejects the password. Starts the
    // receive loop on success.
    void auth_password(const std::string& user, const std::string& password);
    std::shared_ptr<Channel> open_session() { return connection_.open_session(); }
    const std::string& server_ident() const { return transport_.peer_ident(); }
    bool alive() const { return connection_.alive(); }
    void close();

private:
    Client(Socket socket, TransportOptions options);

    Transport transport_;
    Connection connection_;
    std::thread reader_;
};

// Connects, reads the server's identification line and disconnects.
std::string grab_banner(const Endpoint& to, std::chrono::milliseconds timeout = std::chrono::seconds(10));

}  // namespace sshdecoy::ssh
