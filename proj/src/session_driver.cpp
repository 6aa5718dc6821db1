#include "sshdecoy/session_driver.hpp"

#include <thread>

namespace sshdecoy {

SessionDriver::SessionDriver(SessionEngine& engine, SessionChannel& client, SessionChannel& host)
    : engine_(engine), client_(client), host_(host) {}

Millis SessionDriver::now() const {
    return std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - t0_);
}

// Called with mu_ held, so output keeps the order the engine produced it in.
void SessionDriver::flush() {
    if (Bytes b = engine_.take_to_host(); !b.empty()) host_.write(b);
    if (Bytes b = engine_.take_to_client(); !b.empty()) client_.write(b);
}

void SessionDriver::resize(int cols, int rows) {
    {
        std::lock_guard lock(mu_);
        engine_.on_resize(cols, rows);
    }
    host_.resize(cols, rows);
}

void SessionDriver::run() {
    auto pump = [&](DuplexChannel& from, bool from_client) {
        for (;;) {
            Bytes b = from.read();
            std::lock_guard lock(mu_);
            if (b.empty()) {
                (from_client ? client_eof_ : host_eof_) = true;
                cv_.notify_all();
                return;
            }
            if (from_client) engine_.on_client_data(b, now());
            else engine_.on_host_data(b, now());
            flush();
            cv_.notify_all();
        }
    };
    std::thread client_reader(pump, std::ref(client_), true);
    std::thread host_reader(pump, std::ref(host_), false);
    bool host_done = false;
    {
        std::unique_lock lock(mu_);
        while (!client_eof_ && !host_eof_ && !engine_.closed()) {
            if (auto dl = engine_.next_deadline()) {
                const Millis wait = *dl - now();
                if (wait > Millis(0)) cv_.wait_for(lock, wait);
                engine_.on_tick(now());
                flush();
            } else {
                cv_.wait(lock);
            }
        }
        if (host_eof_) engine_.on_host_closed();
        else engine_.on_client_closed();
        flush();
        host_done = host_eof_;
    }
    if (host_done && host_.wait_closed(std::chrono::seconds(2)))
        if (auto status = host_.exit_status()) client_.send_exit_status(*status);
    client_.close_write();
    host_.close_write();
    client_.close();
    host_.close();
    client_reader.join();
    host_reader.join();
}

}  // namespace sshdecoy
