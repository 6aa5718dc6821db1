#include "sshdecoy/ssh/connection.hpp"

#include <algorithm>

namespace sshdecoy::ssh {

Channel::Channel(Connection& conn, std::uint32_t local_id) : conn_(conn), local_id_(local_id) {}

Bytes Channel::read() { return out_.pop(); }

Bytes Channel::read_stderr() { return err_.pop(); }

void Channel::write(ByteView data) { send_data(data, std::nullopt); }

void Channel::write_stderr(ByteView data) { send_data(data, 1u); }

void Channel::send_data(ByteView data, std::optional<std::uint32_t> ext) {
    while (!data.empty()) {
        std::size_t n = 0;
        std::uint32_t remote = 0;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return remote_window_ > 0 || dead_ || close_received_ || close_sent_ || eof_sent_; });
            if (dead_ || close_received_ || close_sent_ || eof_sent_) return;
            n = std::min<std::size_t>({data.size(), static_cast<std::size_t>(remote_window_), remote_max_packet_ - 64});
            remote_window_ -= n;
            remote = remote_id_;
        }
        Writer w;
        if (ext) w.byte(msg::kChannelExtendedData).u32(remote).u32(*ext);
        else w.byte(msg::kChannelData).u32(remote);
        w.string(data.substr(0, n));
        conn_.send(w.data());
        data.remove_prefix(n);
    }
}

void Channel::close_write() {
    std::uint32_t remote = 0;
    {
        std::lock_guard lock(mu_);
        if (eof_sent_ || close_sent_ || dead_ || !open_) return;
        eof_sent_ = true;
        remote = remote_id_;
    }
    cv_.notify_all();
    conn_.send(Writer().byte(msg::kChannelEof).u32(remote).take());
}

void Channel::close() {
    bool forget = false;
    std::uint32_t remote = 0;
    bool send = false;
    {
        std::lock_guard lock(mu_);
        if (!close_sent_ && open_ && !dead_) {
            close_sent_ = true;
            send = true;
            remote = remote_id_;
        }
        forget = close_received_ || dead_;
    }
    cv_.notify_all();
    out_.finish();
    err_.finish();
    if (send) conn_.send(Writer().byte(msg::kChannelClose).u32(remote).take());
    if (forget) conn_.forget(local_id_);
}

void Channel::resize(int cols, int rows) {
    const Bytes data = Writer().u32(static_cast<std::uint32_t>(cols)).u32(static_cast<std::uint32_t>(rows)).u32(0).u32(0).take();
    request("window-change", data, false);
}

void Channel::send_exit_status(int status) {
    request("exit-status", Writer().u32(static_cast<std::uint32_t>(status)).take(), false);
}

std::optional<int> Channel::exit_status() const {
    std::lock_guard lock(mu_);
    return exit_status_;
}

bool Channel::request(const std::string& type, ByteView data, bool want_reply) {
    std::uint32_t remote = 0;
    {
        std::lock_guard lock(mu_);
        if (dead_ || close_sent_ || close_received_) return false;
        remote = remote_id_;
        if (want_reply) replies_.emplace_back(std::nullopt);
    }
    conn_.send(Writer().byte(msg::kChannelRequest).u32(remote).string(type).boolean(want_reply).raw(data).take());
    if (!want_reply) return true;
    std::unique_lock lock(mu_);
    // Replies arrive in request order.
    cv_.wait(lock, [&] { return dead_ || close_received_ || (!replies_.empty() && replies_.front().has_value()); });
    if (replies_.empty() || !replies_.front().has_value()) return false;
    const bool ok = *replies_.front();
    replies_.pop_front();
    return ok;
}

bool Channel::request_pty(const std::string& term, int cols, int rows) {
    Writer w;
    w.string(term).u32(static_cast<std::uint32_t>(cols)).u32(static_cast<std::uint32_t>(rows)).u32(0).u32(0);
    w.string("");  // terminal modes: defaults
    return request("pty-req", w.data());
}

bool Channel::request_exec(const std::string& command) { return request("exec", Writer().string(command).take()); }

bool Channel::request_subsystem(const std::string& name) {
    return request("subsystem", Writer().string(name).take());
}

void Channel::set_request_handler(std::function<bool(const ChannelRequest&)> handler) {
    std::lock_guard lock(mu_);
    handler_ = std::move(handler);
}

void Channel::set_resize_handler(std::function<void(int, int)> handler) {
    std::lock_guard lock(mu_);
    resize_handler_ = std::move(handler);
}

bool Channel::wait_closed(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return close_received_ || dead_; });
}

// --- connection --------------------------------------------------------------

Connection::Connection(Transport& transport) : transport_(transport) {}

Connection::~Connection() { finish(); }

void Connection::set_open_handler(std::function<bool(std::shared_ptr<Channel>)> handler) {
    std::lock_guard lock(mu_);
    open_handler_ = std::move(handler);
}

void Connection::send(ByteView payload) {
    if (!alive_) return;
    try {
        transport_.send(payload);
    } catch (const std::exception&) {
        alive_ = false;
    }
}

std::shared_ptr<Channel> Connection::find(std::uint32_t id) {
    std::lock_guard lock(mu_);
    auto it = channels_.find(id);
    return it == channels_.end() ? nullptr : it->second;
}

void Connection::forget(std::uint32_t id) {
    std::lock_guard lock(mu_);
    channels_.erase(id);
}

void Connection::run() {
    try {
        while (alive_) dispatch(transport_.recv());
    } catch (const std::exception&) {
    }
    finish();
}

void Connection::finish() {
    alive_ = false;
    std::map<std::uint32_t, std::shared_ptr<Channel>> chans;
    {
        std::lock_guard lock(mu_);
        chans.swap(channels_);
    }
    for (auto& [id, ch] : chans) {
        {
            std::lock_guard lock(ch->mu_);
            ch->dead_ = true;
        }
        ch->cv_.notify_all();
        ch->out_.finish();
        ch->err_.finish();
    }
}

std::shared_ptr<Channel> Connection::open_session(std::chrono::milliseconds timeout) {
    std::shared_ptr<Channel> ch;
    {
        std::lock_guard lock(mu_);
        ch = std::make_shared<Channel>(*this, next_id_++);
        ch->local_window_ = kWindow;
        channels_[ch->local_id_] = ch;
    }
    send(Writer().byte(msg::kChannelOpen).string("session").u32(ch->local_id_).u32(kWindow).u32(kMaxPacket).take());
    std::unique_lock lock(ch->mu_);
    ch->cv_.wait_for(lock, timeout, [&] { return ch->open_ || ch->open_failed_ || ch->dead_; });
    if (!ch->open_) {
        lock.unlock();
        forget(ch->local_id_);
        return nullptr;
    }
    return ch;
}

void Connection::dispatch(const Bytes& payload) {
    Reader r(payload);
    const std::uint8_t type = r.byte();
    switch (type) {
        case msg::kGlobalRequest: {
            r.string();
            if (r.boolean()) send(Bytes(1, static_cast<char>(msg::kRequestFailure)));
            return;
        }
        case msg::kRequestSuccess:
        case msg::kRequestFailure: return;
        case msg::kChannelOpen: {
            const std::string kind = r.string();
            const std::uint32_t sender = r.u32();
            const std::uint32_t window = r.u32();
            const std::uint32_t max_packet = r.u32();
            std::function<bool(std::shared_ptr<Channel>)> handler;
            {
                std::lock_guard lock(mu_);
                handler = open_handler_;
            }
            if (kind != "session" || !handler) {
                send(Writer().byte(msg::kChannelOpenFailure).u32(sender).u32(kind == "session" ? 1 : 3)
                         .string("channel type not supported").string("").take());
                return;
            }
            std::shared_ptr<Channel> ch;
            {
                std::lock_guard lock(mu_);
                ch = std::make_shared<Channel>(*this, next_id_++);
                channels_[ch->local_id_] = ch;
            }
            {
                std::lock_guard lock(ch->mu_);
                ch->remote_id_ = sender;
                ch->remote_window_ = window;
                ch->remote_max_packet_ = std::max<std::uint32_t>(max_packet, 1024);
                ch->local_window_ = kWindow;
                ch->open_ = true;
            }
            send(Writer().byte(msg::kChannelOpenConfirmation).u32(sender).u32(ch->local_id_).u32(kWindow)
                     .u32(kMaxPacket).take());
            if (!handler(ch)) ch->close();
            return;
        }
        default: break;
    }
    if (type < msg::kChannelOpenConfirmation || type > msg::kChannelFailure) return;
    const std::uint32_t id = r.u32();
    auto ch = find(id);
    if (!ch) return;
    switch (type) {
        case msg::kChannelOpenConfirmation: {
            std::lock_guard lock(ch->mu_);
            ch->remote_id_ = r.u32();
            ch->remote_window_ = r.u32();
            ch->remote_max_packet_ = std::max<std::uint32_t>(r.u32(), 1024);
            ch->open_ = true;
            break;
        }
        case msg::kChannelOpenFailure: {
            std::lock_guard lock(ch->mu_);
            ch->open_failed_ = true;
            break;
        }
        case msg::kChannelWindowAdjust: {
            std::lock_guard lock(ch->mu_);
            ch->remote_window_ += r.u32();
            break;
        }
        case msg::kChannelData:
        case msg::kChannelExtendedData: {
            const std::uint32_t code = type == msg::kChannelExtendedData ? r.u32() : 0;
            const Bytes data = r.string();
            std::uint32_t adjust = 0;
            std::uint32_t remote = 0;
            {
                std::lock_guard lock(ch->mu_);
                ch->local_window_ -= std::min<std::uint64_t>(ch->local_window_, data.size());
                if (ch->local_window_ < kWindow / 2) {
                    adjust = static_cast<std::uint32_t>(kWindow - ch->local_window_);
                    ch->local_window_ = kWindow;
                    remote = ch->remote_id_;
                }
            }
            if (type == msg::kChannelData) ch->out_.push(data);
            else if (code == 1) ch->err_.push(data);
            if (adjust) send(Writer().byte(msg::kChannelWindowAdjust).u32(remote).u32(adjust).take());
            return;
        }
        case msg::kChannelEof:
            ch->out_.finish();
            ch->err_.finish();
            return;
        case msg::kChannelClose: {
            bool reply = false;
            std::uint32_t remote = 0;
            {
                std::lock_guard lock(ch->mu_);
                ch->close_received_ = true;
                if (!ch->close_sent_) {
                    ch->close_sent_ = true;
                    reply = true;
                }
                remote = ch->remote_id_;
            }
            ch->cv_.notify_all();
            ch->out_.finish();
            ch->err_.finish();
            if (reply) send(Writer().byte(msg::kChannelClose).u32(remote).take());
            forget(id);
            return;
        }
        case msg::kChannelRequest: {
            ChannelRequest req;
            req.type = r.string();
            req.want_reply = r.boolean();
            req.data = Bytes(r.rest());
            bool ok = false;
            if (req.type == "exit-status") {
                Reader d(req.data);
                std::lock_guard lock(ch->mu_);
                ch->exit_status_ = static_cast<int>(d.u32());
                ok = true;
            } else if (req.type == "exit-signal") {
                std::lock_guard lock(ch->mu_);
                ch->exit_status_ = 255;
                ok = true;
            } else if (req.type == "window-change") {
                Reader d(req.data);
                const int cols = static_cast<int>(d.u32());
                const int rows = static_cast<int>(d.u32());
                std::function<void(int, int)> handler;
                {
                    std::lock_guard lock(ch->mu_);
                    handler = ch->resize_handler_;
                }
                if (handler) handler(cols, rows);
                ok = true;
            } else {
                std::function<bool(const ChannelRequest&)> handler;
                {
                    std::lock_guard lock(ch->mu_);
                    handler = ch->handler_;
                }
                ok = handler && handler(req);
            }
            if (req.want_reply) {
                std::uint32_t remote = 0;
                {
                    std::lock_guard lock(ch->mu_);
                    remote = ch->remote_id_;
                }
                send(Writer().byte(ok ? msg::kChannelSuccess : msg::kChannelFailure).u32(remote).take());
            }
            return;
        }
        case msg::kChannelSuccess:
        case msg::kChannelFailure: {
            std::lock_guard lock(ch->mu_);
            for (auto& slot : ch->replies_)
                if (!slot) {
                    slot = type == msg::kChannelSuccess;
                    break;
                }
            break;
        }
        default: return;
    }
    ch->cv_.notify_all();
}

}  // namespace sshdecoy::ssh
