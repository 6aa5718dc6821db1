#include "ssh_harness.hpp"

#include <stdexcept>

namespace sshdecoy::testing {

ShellClient::ShellClient(const Endpoint& to, const std::string& user, const std::string& password, int cols,
                         int rows) {
    client_ = ssh::Client::connect(to);
    client_->auth_password(user, password);
    channel_ = client_->open_session();
    if (!channel_ || !channel_->request_pty("xterm", cols, rows) || !channel_->request_shell())
        throw std::runtime_error("shell refused");
    last_ = std::chrono::steady_clock::now();
    reader_ = std::thread([this] {
        for (;;) {
            Bytes b = channel_->read();
            std::lock_guard lock(mu_);
            last_ = std::chrono::steady_clock::now();
            if (b.empty()) {
                eof_ = true;
                cv_.notify_all();
                return;
            }
            out_ += b;
            cv_.notify_all();
        }
    });
}

ShellClient::~ShellClient() { close(); }

void ShellClient::send(ByteView keys) { channel_->write(keys); }

bool ShellClient::wait_for(const std::string& needle, std::chrono::milliseconds timeout, std::size_t from) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return out_.find(needle, std::min(from, out_.size())) != std::string::npos; });
}

bool ShellClient::wait_until(const std::function<bool(const std::string&)>& done, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return done(out_); });
}

std::string ShellClient::run(const std::string& line, std::chrono::milliseconds timeout) {
    const std::size_t from = size();
    send(line + "\r");
    auto at_prompt = [&](const std::string& out) {
        if (out.size() <= from + line.size()) return false;
        const auto echo_end = out.find("\r\n", from);
        if (echo_end == std::string::npos) return false;
        return out.size() >= 2 && (out.compare(out.size() - 2, 2, "$ ") == 0 || out.compare(out.size() - 2, 2, "# ") == 0);
    };
    if (!wait_until(at_prompt, timeout)) throw std::runtime_error("no prompt after: " + line);
    const std::string out = transcript();
    const std::size_t body = out.find("\r\n", from) + 2;
    const std::size_t prompt = out.rfind("\r\n") == std::string::npos || out.rfind("\r\n") < body
                                   ? body
                                   : out.rfind("\r\n") + 2;
    return out.substr(body, prompt - body);
}

void ShellClient::settle(std::chrono::milliseconds quiet) {
    std::unique_lock lock(mu_);
    for (;;) {
        const auto due = last_ + quiet;
        if (eof_ || std::chrono::steady_clock::now() >= due) return;
        cv_.wait_until(lock, due);
    }
}

bool ShellClient::wait_closed(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return eof_; });
}

std::string ShellClient::transcript() const {
    std::lock_guard lock(mu_);
    return out_;
}

std::size_t ShellClient::size() const {
    std::lock_guard lock(mu_);
    return out_.size();
}

void ShellClient::close() {
    if (!client_) return;
    if (channel_) channel_->close();
    client_->close();
    if (reader_.joinable()) reader_.join();
    client_.reset();
}

ExecOutput ssh_exec(const Endpoint& to, const std::string& user, const std::string& password,
                    const std::string& command) {
    auto client = ssh::Client::connect(to);
    client->auth_password(user, password);
    auto ch = client->open_session();
    if (!ch || !ch->request_exec(command)) throw std::runtime_error("exec refused");
    ExecOutput r;
    std::thread err([&] {
        for (Bytes b; !(b = ch->read_stderr()).empty();) r.err += b;
    });
    for (Bytes b; !(b = ch->read()).empty();) r.out += b;
    err.join();
    ch->wait_closed(std::chrono::seconds(5));
    r.status = ch->exit_status().value_or(-1);
    client->close();
    return r;
}

}  // namespace sshdecoy::testing
