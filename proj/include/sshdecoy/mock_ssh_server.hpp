#pragma once

#include <atomic>
#include <list>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "sshdecoy/mock_host.hpp"
#include "sshdecoy/net.hpp"
#include "sshdecoy/ssh/crypto.hpp"
#include "sshdecoy/ssh/endpoint.hpp"

namespace sshdecoy {

// Serves MockShell sessions over SSH. Every connection gets a fresh shell
// built from the same script; exec requests run MockShell::exec.
class MockSshServer {
public:
    explicit MockSshServer(MockScript script, Endpoint listen = {"127.0.0.1", 0});
    ~MockSshServer();
    MockSshServer(const MockSshServer&) = delete;
    MockSshServer& operator=(const MockSshServer&) = delete;

    Endpoint endpoint() const;
    const ssh::HostKey& host_key() const { return key_; }
    // TCP connections accepted so far, banner grabs included.
    std::size_t connections() const { return connections_; }
    std::size_t auth_attempts() const { return auth_attempts_; }
    // Commands executed by interactive shells that have ended.
    std::vector<ExecutedCommand> executed() const;
    std::vector<std::string> exec_log() const;
    void stop();

private:
    void serve(Socket socket);

    MockScript script_;
    std::string host_;
    ssh::HostKey key_;
    Listener listener_;
    std::thread acceptor_;
    std::atomic<bool> stopping_{false};
    std::atomic<std::size_t> connections_{0};
    std::atomic<std::size_t> auth_attempts_{0};
    mutable std::mutex mu_;
    std::list<std::thread> workers_;
    std::set<ssh::ServerSession*> live_;
    std::vector<ExecutedCommand> executed_;
    std::vector<std::string> exec_log_;
};

}  // namespace sshdecoy
