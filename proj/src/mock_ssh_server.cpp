#include "sshdecoy/mock_ssh_server.hpp"

namespace sshdecoy {

MockSshServer::MockSshServer(MockScript script, Endpoint listen)
    : script_(std::move(script)), host_(listen.host), key_(ssh::HostKey::generate()), listener_(listen) {
    acceptor_ = std::thread([this] {
        while (!stopping_) {
            std::optional<Socket> s;
            try {
                s = listener_.accept();
            } catch (const std::exception&) {
                continue;
            }
            if (!s) break;
            ++connections_;
            std::lock_guard lock(mu_);
            workers_.emplace_back([this, sock = std::make_shared<Socket>(std::move(*s))] {
                try {
                    serve(std::move(*sock));
                } catch (const std::exception&) {
                }
            });
        }
    });
}

MockSshServer::~MockSshServer() { stop(); }

Endpoint MockSshServer::endpoint() const {
    return Endpoint{host_, static_cast<std::uint16_t>(listener_.port())};
}

std::vector<ExecutedCommand> MockSshServer::executed() const {
    std::lock_guard lock(mu_);
    return executed_;
}

std::vector<std::string> MockSshServer::exec_log() const {
    std::lock_guard lock(mu_);
    return exec_log_;
}

void MockSshServer::stop() {
    if (stopping_.exchange(true)) return;
    listener_.close();
    if (acceptor_.joinable()) acceptor_.join();
    std::list<std::thread> workers;
    {
        std::lock_guard lock(mu_);
        for (auto* s : live_) s->close();
        workers.swap(workers_);
    }
    for (auto& t : workers) t.join();
}

void MockSshServer::serve(Socket socket) {
    ssh::ServerSession server(std::move(socket), key_, script_.banner);
    {
        std::lock_guard lock(mu_);
        if (stopping_) return;
        live_.insert(&server);
    }
    std::vector<std::thread> threads;
    std::mutex threads_mu;
    try {
        server.handshake();
        std::optional<MockScript> script;
        const auto user = server.authenticate([&](const std::string& u, const std::string& p) {
            ++auth_attempts_;
            script = script_.login(u, p);
            return script ? ssh::AuthVerdict::Accept : ssh::AuthVerdict::Reject;
        });
        if (user) {
            server.connection().set_open_handler([&](std::shared_ptr<ssh::Channel> ch) {
                auto size = std::make_shared<std::pair<int, int>>(80, 24);
                auto started = std::make_shared<bool>(false);
                ch->set_request_handler([&, ch, size, started](const ssh::ChannelRequest& req) {
                    ssh::Reader r(req.data);
                    if (req.type == "pty-req") {
                        r.string();
                        size->first = static_cast<int>(r.u32());
                        size->second = static_cast<int>(r.u32());
                        return true;
                    }
                    if (req.type == "env") return true;
                    if ((req.type != "shell" && req.type != "exec") || *started) return false;
                    *started = true;
                    const std::string command = req.type == "exec" ? r.string() : std::string();
                    const bool shell = req.type == "shell";
                    const auto [cols, rows] = *size;
                    std::lock_guard lock(threads_mu);
                    threads.emplace_back([this, &script, ch, shell, command, cols = cols, rows = rows] {
                        MockShell sh(*script, cols, rows);
                        int status = 0;
                        if (shell) {
                            serve_mock_shell(sh, *ch);
                            std::lock_guard lock(mu_);
                            executed_.insert(executed_.end(), sh.executed().begin(), sh.executed().end());
                            return;
                        } else {
                            {
                                std::lock_guard lock(mu_);
                                exec_log_.push_back(command);
                            }
                            const Bytes out = sh.exec(command, &status);
                            if (!out.empty()) ch->write(out);
                        }
                        ch->send_exit_status(status);
                        ch->close_write();
                        ch->close();
                    });
                    return true;
                });
                return true;
            });
            server.run();
        }
    } catch (const std::exception&) {
    }
    server.close();
    {
        std::lock_guard lock(threads_mu);
        for (auto& t : threads) t.join();
    }
    std::lock_guard lock(mu_);
    live_.erase(&server);
}

}  // namespace sshdecoy
