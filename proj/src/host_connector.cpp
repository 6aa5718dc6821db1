#include "sshdecoy/host_connector.hpp"

#include <thread>

#include "sshdecoy/ssh/endpoint.hpp"

namespace sshdecoy {

HostExecResult HostSession::exec(const std::string& command) {
    HostExecResult result;
    auto ch = open_exec(command);
    if (!ch) {
        result.status = 255;
        return result;
    }
    std::thread err_reader([&] {
        for (Bytes b; !(b = ch->read_stderr()).empty();) result.err += b;
    });
    for (Bytes b; !(b = ch->read()).empty();) result.out += b;
    err_reader.join();
    result.status = ch->exit_status().value_or(255);
    ch->close();
    return result;
}

namespace {

class SshHostSession final : public HostSession {
public:
    explicit SshHostSession(std::unique_ptr<ssh::Client> client) : client_(std::move(client)) {}

    std::shared_ptr<SessionChannel> open_shell(const std::string& term, int cols, int rows, bool pty) override {
        auto ch = client_->open_session();
        if (!ch) return nullptr;
        if (pty && !ch->request_pty(term, cols, rows)) return refuse(ch);
        if (!ch->request_shell()) return refuse(ch);
        return ch;
    }

    std::shared_ptr<SessionChannel> open_exec(const std::string& command) override {
        auto ch = client_->open_session();
        if (!ch) return nullptr;
        if (!ch->request_exec(command)) return refuse(ch);
        return ch;
    }

    std::shared_ptr<SessionChannel> open_subsystem(const std::string& name) override {
        auto ch = client_->open_session();
        if (!ch) return nullptr;
        if (!ch->request_subsystem(name)) return refuse(ch);
        return ch;
    }

    void close() override { client_->close(); }

private:
    static std::shared_ptr<SessionChannel> refuse(const std::shared_ptr<ssh::Channel>& ch) {
        ch->close();
        return nullptr;
    }

    std::unique_ptr<ssh::Client> client_;
};

}  // namespace

SshHostConnector::SshHostConnector(Endpoint host, std::string fingerprint)
    : host_(std::move(host)), fingerprint_(std::move(fingerprint)) {}

std::unique_ptr<HostSession> SshHostConnector::connect(const std::string& username, const std::string& password) {
    std::unique_ptr<ssh::Client> client;
    try {
        ssh::ClientOptions options;
        options.fingerprint = fingerprint_;
        client = ssh::Client::connect(host_, options);
    } catch (const std::exception& e) {
        throw HostUnavailable(host_.str() + ": " + e.what());
    }
    try {
        client->auth_password(username, password);
    } catch (const ssh::AuthFailed& e) {
        throw HostAuthFailed(e.what());
    } catch (const std::exception& e) {
        throw HostUnavailable(host_.str() + ": " + e.what());
    }
    return std::make_unique<SshHostSession>(std::move(client));
}

}  // namespace sshdecoy
