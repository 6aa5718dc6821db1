#include "sshdecoy/channel.hpp"

namespace sshdecoy {

void ByteQueue::push(ByteView data) {
    if (data.empty()) return;
    {
        std::lock_guard lock(mu_);
        if (eof_) return;
        buf_.append(data);
    }
    cv_.notify_all();
}

void ByteQueue::finish() {
    {
        std::lock_guard lock(mu_);
        eof_ = true;
    }
    cv_.notify_all();
}

Bytes ByteQueue::pop() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !buf_.empty() || eof_; });
    Bytes out;
    out.swap(buf_);
    return out;
}

void PipeEndpoint::resize(int cols, int rows) {
    std::function<void(int, int)> handler;
    {
        std::lock_guard lock(*resize_mu_);
        handler = *peer_resize_;
    }
    if (handler) handler(cols, rows);
}

void PipeEndpoint::set_resize_handler(std::function<void(int, int)> handler) {
    std::lock_guard lock(*resize_mu_);
    *own_resize_ = std::move(handler);
}

std::pair<std::unique_ptr<PipeEndpoint>, std::unique_ptr<PipeEndpoint>> make_pipe() {
    auto ab = std::make_shared<ByteQueue>();
    auto ba = std::make_shared<ByteQueue>();
    auto a = std::make_unique<PipeEndpoint>(ba, ab);
    auto b = std::make_unique<PipeEndpoint>(ab, ba);
    auto mu = std::make_shared<std::mutex>();
    a->resize_mu_ = mu;
    b->resize_mu_ = mu;
    a->peer_resize_ = b->own_resize_;
    b->peer_resize_ = a->own_resize_;
    return {std::move(a), std::move(b)};
}

}  // namespace sshdecoy
