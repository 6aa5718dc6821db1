#pragma once

#include <condition_variable>
#include <mutex>

#include "sshdecoy/channel.hpp"
#include "sshdecoy/session_engine.hpp"

namespace sshdecoy {

// Runs a SessionEngine between two live channels with the wall clock.
// run() returns once either side has closed; both channels are closed then
// and the host's exit status, when known, is passed on to the client.
class SessionDriver {
public:
    SessionDriver(SessionEngine& engine, SessionChannel& client, SessionChannel& host);

    void run();
    // Safe to call from any thread.
    void resize(int cols, int rows);

private:
    Millis now() const;
    void flush();

    SessionEngine& engine_;
    SessionChannel& client_;
    SessionChannel& host_;
    std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
    std::mutex mu_;
    std::condition_variable cv_;
    bool client_eof_ = false;
    bool host_eof_ = false;
};

}  // namespace sshdecoy
