#include "sshdecoy/ssh/endpoint.hpp"

namespace sshdecoy::ssh {

namespace {

Bytes recv_skipping(Transport& t) {
    for (;;) {
        Bytes p = t.recv();
        if (p.empty()) continue;
        const auto type = static_cast<std::uint8_t>(p[0]);
        if (type == msg::kExtInfo || type == msg::kUserauthBanner || type == msg::kGlobalRequest) continue;
        return p;
    }
}

}  // namespace

ServerSession::ServerSession(Socket socket, const HostKey& key, std::string ident)
    : transport_(std::move(socket), Role::Server, TransportOptions{std::move(ident), &key, {}}), connection_(transport_) {}

ServerSession::~ServerSession() { close(); }

void ServerSession::handshake() { transport_.handshake(); }

std::optional<std::string> ServerSession::authenticate(
    const std::function<AuthVerdict(const std::string&, const std::string&)>& check, int max_attempts) {
    {
        Bytes p = recv_skipping(transport_);
        Reader r(p);
        if (r.byte() != msg::kServiceRequest || r.string() != "ssh-userauth") {
            transport_.disconnect(kDisconnectProtocolError, "expected ssh-userauth");
            return std::nullopt;
        }
        transport_.send(Writer().byte(msg::kServiceAccept).string("ssh-userauth").take());
    }
    const Bytes failure = Writer().byte(msg::kUserauthFailure).name_list({"password"}).boolean(false).take();
    int attempts = 0;
    for (;;) {
        Bytes p = recv_skipping(transport_);
        Reader r(p);
        if (r.byte() != msg::kUserauthRequest) {
            transport_.disconnect(kDisconnectProtocolError, "expected userauth request");
            return std::nullopt;
        }
        const std::string user = r.string();
        const std::string service = r.string();
        const std::string method = r.string();
        if (method != "password" || service != "ssh-connection") {
            transport_.send(failure);
            continue;
        }
        if (r.boolean()) {  // password change request
            transport_.send(failure);
            continue;
        }
        const std::string password = r.string();
        switch (check(user, password)) {
            case AuthVerdict::Accept:
                transport_.send(Bytes(1, static_cast<char>(msg::kUserauthSuccess)));
                return user;
            case AuthVerdict::Disconnect:
                transport_.disconnect(kDisconnectNoMoreAuthMethods, "authentication failed");
                return std::nullopt;
            case AuthVerdict::Reject: break;
        }
        if (++attempts >= max_attempts) {
            transport_.disconnect(kDisconnectNoMoreAuthMethods, "too many authentication failures");
            return std::nullopt;
        }
        transport_.send(failure);
    }
}

void ServerSession::close() { transport_.shutdown(); }

Client::Client(Socket socket, TransportOptions options)
    : transport_(std::move(socket), Role::Client, std::move(options)), connection_(transport_) {}

std::unique_ptr<Client> Client::connect(const Endpoint& to, const ClientOptions& options) {
    Socket s = connect_tcp(to, options.timeout);
    s.set_read_timeout(options.timeout);
    TransportOptions t;
    t.ident = options.ident;
    const std::string pin = options.fingerprint;
    t.verify_host_key = [pin](ByteView blob) { return pin.empty() || fingerprint(blob) == pin; };
    std::unique_ptr<Client> c(new Client(std::move(s), std::move(t)));
    c->transport_.handshake();
    return c;
}

Client::~Client() { close(); }

void Client::auth_password(const std::string& user, const std::string& password) {
    transport_.send(Writer().byte(msg::kServiceRequest).string("ssh-userauth").take());
    {
        Bytes p = recv_skipping(transport_);
        if (static_cast<std::uint8_t>(p[0]) != msg::kServiceAccept) throw ProtocolError("ssh-userauth refused");
    }
    transport_.send(Writer()
                        .byte(msg::kUserauthRequest)
                        .string(user)
                        .string("ssh-connection")
                        .string("password")
                        .boolean(false)
                        .string(password)
                        .take());
    Bytes p = recv_skipping(transport_);
    const auto type = static_cast<std::uint8_t>(p[0]);
    if (type == msg::kUserauthFailure) throw AuthFailed("password rejected");
    if (type != msg::kUserauthSuccess) throw ProtocolError("unexpected reply to userauth");
    // The handshake ran with a timeout; the session itself may idle.
    transport_.socket().set_read_timeout(std::chrono::milliseconds(0));
    reader_ = std::thread([this] { connection_.run(); });
}

void Client::close() {
    transport_.shutdown();
    if (reader_.joinable()) reader_.join();
}

std::string grab_banner(const Endpoint& to, std::chrono::milliseconds timeout) {
    Socket s = connect_tcp(to, timeout);
    s.set_read_timeout(timeout);
    for (int lines = 0; lines < 64; ++lines) {
        std::string line;
        char c = 0;
        while (line.size() < 255) {
            if (s.read_some(&c, 1) == 0) throw Disconnected("connection closed before identification");
            if (c == '\n') break;
            line += c;
        }
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (starts_with(line, "SSH-")) return line;
    }
    throw ProtocolError("no identification line");
}

}  // namespace sshdecoy::ssh
