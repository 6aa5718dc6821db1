#include "sshdecoy/proxy.hpp"

#include <spdlog/spdlog.h>

#include "sshdecoy/session_driver.hpp"

namespace sshdecoy {

namespace {

// Copies streams both ways until the host side finishes.
void relay(ssh::Channel& client, SessionChannel& host) {
    std::thread up([&] {
        for (Bytes b; !(b = client.read()).empty();) host.write(b);
        host.close_write();
    });
    std::thread err([&] {
        for (Bytes b; !(b = host.read_stderr()).empty();) client.write_stderr(b);
    });
    for (Bytes b; !(b = host.read()).empty();) client.write(b);
    err.join();
    if (host.wait_closed(std::chrono::seconds(2)))
        if (auto status = host.exit_status()) client.send_exit_status(*status);
    client.close_write();
    client.close();
    host.close();
    up.join();
}

void refuse(ssh::Channel& client, const std::string& why) {
    client.write_stderr(why + "\r\n");
    client.send_exit_status(1);
    client.close();
}

struct ChannelState {
    std::mutex mu;
    std::string term = "xterm";
    int cols = 80;
    int rows = 24;
    bool pty = false;
    bool started = false;
    SessionDriver* driver = nullptr;
    std::shared_ptr<SessionChannel> host;
};

}  // namespace

std::string resolve_banner(const ProxyConfig& config) {
    if (config.banner.mode == BannerMode::Static) return config.banner.value;
    std::string host_banner;
    try {
        host_banner = ssh::grab_banner(config.host);
    } catch (const std::exception& e) {
        throw HostUnavailable("cannot read the banner of " + config.host.str() + ": " + e.what());
    }
    if (config.banner.mode == BannerMode::Mirror) return host_banner;
    return rewrite_banner(host_banner, config.banner.version);
}

std::shared_ptr<EventRecorder> make_recorder(const ProxyConfig& config) {
    BlockState state;
    state.policy = config.block_policy;
    state.blocked.insert(config.blocklist_seed.begin(), config.blocklist_seed.end());
    auto recorder = std::make_shared<EventRecorder>(std::make_shared<BlockList>(std::move(state)));
    for (const auto& sink : config.sinks) {
        if (sink.type == SinkType::File) recorder->add_sink(std::make_shared<FileSink>(sink.path));
        else recorder->add_sink(std::make_shared<SqliteSink>(sink.path.string()));
    }
    return recorder;
}

ProxyServer::ProxyServer(ProxyConfig config, std::shared_ptr<EventRecorder> recorder,
                         std::shared_ptr<HostConnector> connector)
    : config_(std::move(config)),
      settings_(EngineSettings::from_config(config_)),
      recorder_(std::move(recorder)),
      connector_(std::move(connector)) {
    if (!connector_) connector_ = std::make_shared<SshHostConnector>(config_.host, config_.host_fingerprint);
}

ProxyServer::~ProxyServer() { stop(); }

void ProxyServer::start() {
    banner_ = resolve_banner(config_);
    key_ = config_.host_key.empty() ? ssh::HostKey::generate() : ssh::HostKey::load_or_create(config_.host_key);
    listener_ = std::make_unique<Listener>(config_.listen);
    spdlog::info("listening on {} for host {}, banner \"{}\", key {}", endpoint().str(), config_.host.str(), banner_,
                 key_->fingerprint());
    acceptor_ = std::thread([this] { accept_loop(); });
}

Endpoint ProxyServer::endpoint() const {
    Endpoint e = config_.listen;
    if (listener_) e.port = static_cast<std::uint16_t>(listener_->port());
    return e;
}

std::size_t ProxyServer::active_sessions() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& w : workers_) n += w->done ? 0 : 1;
    return n;
}

void ProxyServer::wait() {
    std::unique_lock lock(mu_);
    stopped_cv_.wait(lock, [&] { return stopping_.load(); });
}

void ProxyServer::stop() {
    if (stopping_.exchange(true)) {
        if (acceptor_.joinable()) acceptor_.join();
        return;
    }
    if (listener_) listener_->close();
    if (acceptor_.joinable()) acceptor_.join();
    {
        std::lock_guard lock(mu_);
        for (auto* s : live_) s->close();
    }
    reap(true);
    stopped_cv_.notify_all();
}

void ProxyServer::reap(bool all) {
    std::list<std::unique_ptr<Worker>> finished;
    {
        std::lock_guard lock(mu_);
        for (auto it = workers_.begin(); it != workers_.end();) {
            if (all || (*it)->done) {
                finished.push_back(std::move(*it));
                it = workers_.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (auto& w : finished) w->thread.join();
}

void ProxyServer::accept_loop() {
    while (!stopping_) {
        std::optional<Socket> s;
        try {
            s = listener_->accept();
        } catch (const std::exception& e) {
            spdlog::warn("accept failed: {}", e.what());
            continue;
        }
        if (!s) break;
        reap(false);
        auto worker = std::make_unique<Worker>();
        Worker* w = worker.get();
        std::lock_guard lock(mu_);
        w->thread = std::thread([this, w, sock = std::make_shared<Socket>(std::move(*s))]() mutable {
            try {
                serve(std::move(*sock));
            } catch (const std::exception& e) {
                spdlog::warn("session ended with error: {}", e.what());
            }
            w->done = true;
        });
        workers_.push_back(std::move(worker));
    }
}

void ProxyServer::serve(Socket socket) {
    const std::string ip = socket.peer_ip();
    SessionEvents events(recorder_, new_session_id(), ip);
    if (auto* blocklist = recorder_->blocklist(); blocklist && !blocklist->is_eligible(ip)) {
        events.record(EventKind::Blocked, "connection refused for blocked address " + ip);
        spdlog::info("[{}] refused blocked address {}", events.session_id(), ip);
        return;
    }
    events.record(EventKind::SessionOpen, "");
    spdlog::info("[{}] connection from {}", events.session_id(), ip);
    socket.set_read_timeout(std::chrono::seconds(60));

    ssh::ServerSession server(std::move(socket), *key_, banner_);
    {
        std::lock_guard lock(mu_);
        if (stopping_) return;
        live_.insert(&server);
    }
    std::unique_ptr<HostSession> host;
    std::vector<std::thread> threads;
    std::mutex threads_mu;
    try {
        server.handshake();
        std::string username;
        const auto user = server.authenticate([&](const std::string& u, const std::string& password) {
            events.set_username(u);
            if (config_.is_honey(u, password)) {
                events.record(EventKind::CredentialHoney, "honey credential " + u + ":" + password);
                spdlog::warn("[{}] honey credential used by {}", events.session_id(), ip);
                return ssh::AuthVerdict::Reject;
            }
            try {
                host = connector_->connect(u, password);
                return ssh::AuthVerdict::Accept;
            } catch (const HostAuthFailed&) {
                return ssh::AuthVerdict::Reject;
            } catch (const HostUnavailable& e) {
                events.record(EventKind::Degraded, std::string("host unavailable: ") + e.what());
                spdlog::error("[{}] host unavailable: {}", events.session_id(), e.what());
                return ssh::AuthVerdict::Disconnect;
            }
        });
        if (user) {
            username = *user;
            spdlog::info("[{}] {} authenticated from {}", events.session_id(), username, ip);
            server.connection().transport().socket().set_read_timeout(std::chrono::milliseconds(0));
            server.connection().set_open_handler([&](std::shared_ptr<ssh::Channel> ch) {
                auto st = std::make_shared<ChannelState>();
                ch->set_resize_handler([st](int cols, int rows) {
                    std::lock_guard lock(st->mu);
                    st->cols = cols;
                    st->rows = rows;
                    if (st->driver) st->driver->resize(cols, rows);
                    else if (st->host) st->host->resize(cols, rows);
                });
                ch->set_request_handler([&, ch, st](const ssh::ChannelRequest& req) {
                    ssh::Reader r(req.data);
                    if (req.type == "pty-req") {
                        std::lock_guard lock(st->mu);
                        st->term = r.string();
                        st->cols = static_cast<int>(r.u32());
                        st->rows = static_cast<int>(r.u32());
                        st->pty = true;
                        return true;
                    }
                    if (req.type == "env") return true;
                    if (req.type != "shell" && req.type != "exec" && req.type != "subsystem") return false;
                    {
                        std::lock_guard lock(st->mu);
                        if (st->started) return false;
                        st->started = true;
                    }
                    const std::string arg = req.type == "shell" ? std::string() : r.string();
                    std::lock_guard lock(threads_mu);
                    threads.emplace_back([&, ch, st, type = req.type, arg] {
                        try {
                            if (type == "shell") {
                                std::unique_lock lock(st->mu);
                                const std::string term = st->term;
                                const int cols = st->cols, rows = st->rows;
                                const bool pty = st->pty;
                                lock.unlock();
                                auto hostch = host->open_shell(term, cols, rows, pty);
                                if (!hostch) return refuse(*ch, "host refused the shell");
                                if (!pty) return relay(*ch, *hostch);
                                lock.lock();
                                st->host = hostch;
                                SessionEngine engine(settings_, SessionFacts{username, ip, st->cols, st->rows}, &events);
                                SessionDriver driver(engine, *ch, *hostch);
                                if (st->cols != cols || st->rows != rows) hostch->resize(st->cols, st->rows);
                                st->driver = &driver;
                                lock.unlock();
                                driver.run();
                                lock.lock();
                                st->driver = nullptr;
                            } else if (type == "exec") {
                                spdlog::info("[{}] exec: {}", events.session_id(), arg);
                                const HostExec run = [&](const std::string& c) { return host->exec(c); };
                                auto result = mediate_exec(arg, settings_, SessionFacts{username, ip, 80, 24}, &events, run);
                                if (result) {
                                    if (!result->out.empty()) ch->write(result->out);
                                    if (!result->err.empty()) ch->write_stderr(result->err);
                                    ch->send_exit_status(result->status);
                                    ch->close_write();
                                    ch->close();
                                    return;
                                }
                                auto hostch = host->open_exec(arg);
                                if (!hostch) return refuse(*ch, "host refused the command");
                                {
                                    std::lock_guard lock(st->mu);
                                    st->host = hostch;
                                }
                                relay(*ch, *hostch);
                            } else {
                                events.record(EventKind::SuspiciousCommand, "subsystem " + arg + " passed through");
                                auto hostch = host->open_subsystem(arg);
                                if (!hostch) return refuse(*ch, "host refused subsystem " + arg);
                                relay(*ch, *hostch);
                            }
                        } catch (const std::exception& e) {
                            spdlog::warn("[{}] channel error: {}", events.session_id(), e.what());
                            ch->close();
                        }
                    });
                    return true;
                });
                return true;
            });
            server.run();
        }
    } catch (const std::exception& e) {
        spdlog::debug("[{}] connection error: {}", events.session_id(), e.what());
    }
    server.close();
    if (host) host->close();
    {
        std::lock_guard lock(threads_mu);
        for (auto& t : threads) t.join();
    }
    host.reset();
    {
        std::lock_guard lock(mu_);
        live_.erase(&server);
    }
    events.record(EventKind::SessionClose, "");
    spdlog::info("[{}] session closed", events.session_id());
}

}  // namespace sshdecoy
