#pragma once

#include <atomic>
#include <condition_variable>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "sshdecoy/config.hpp"
#include "sshdecoy/events.hpp"
#include "sshdecoy/host_connector.hpp"
#include "sshdecoy/net.hpp"
#include "sshdecoy/session_engine.hpp"
#include "sshdecoy/ssh/crypto.hpp"
#include "sshdecoy/ssh/endpoint.hpp"

namespace sshdecoy {

// The identification line sent to clients for this configuration. Mirror
// and Rewrite grab the host's line; throws HostUnavailable when that fails.
std::string resolve_banner(const ProxyConfig& config);

// Event recorder with the configured sinks and blocklist.
std::shared_ptr<EventRecorder> make_recorder(const ProxyConfig& config);

// Accepts client connections and runs one session per connection thread.
class ProxyServer {
public:
    ProxyServer(ProxyConfig config, std::shared_ptr<EventRecorder> recorder,
                std::shared_ptr<HostConnector> connector = nullptr);
    ~ProxyServer();
    ProxyServer(const ProxyServer&) = delete;
    ProxyServer& operator=(const ProxyServer&) = delete;

    // Resolves the banner, loads the host key and starts listening.
    void start();
    // Blocks until stop() is called from another thread.
    void wait();
    void stop();

    Endpoint endpoint() const;  // bound address, with the real port
    const std::string& banner() const { return banner_; }
    const ssh::HostKey& host_key() const { return *key_; }
    std::size_t active_sessions() const;

private:
    struct Worker {
        std::thread thread;
        std::atomic<bool> done{false};
    };

    void accept_loop();
    void serve(Socket socket);
    void reap(bool all);

    ProxyConfig config_;
    EngineSettings settings_;
    std::shared_ptr<EventRecorder> recorder_;
    std::shared_ptr<HostConnector> connector_;
    std::string banner_;
    std::optional<ssh::HostKey> key_;
    std::unique_ptr<Listener> listener_;
    std::thread acceptor_;
    std::atomic<bool> stopping_{false};
    mutable std::mutex mu_;
    std::condition_variable stopped_cv_;
    std::list<std::unique_ptr<Worker>> workers_;
    std::set<ssh::ServerSession*> live_;
};

}  // namespace sshdecoy
