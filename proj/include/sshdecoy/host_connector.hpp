#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "sshdecoy/channel.hpp"
#include "sshdecoy/config.hpp"
#include "sshdecoy/session_engine.hpp"

namespace sshdecoy {

struct HostAuthFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The host could not be reached or spoke an unexpected protocol.
struct HostUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One authenticated connection to the protected host.
class HostSession {
public:
    virtual ~HostSession() = default;
    // Each returns nullptr when the host refuses the channel.
    virtual std::shared_ptr<SessionChannel> open_shell(const std::string& term, int cols, int rows, bool pty) = 0;
    virtual std::shared_ptr<SessionChannel> open_exec(const std::string& command) = 0;
    virtual std::shared_ptr<SessionChannel> open_subsystem(const std::string& name) = 0;
    // Runs a command to completion and collects its streams.
    HostExecResult exec(const std::string& command);
    // Drops the connection; every open channel sees EOF.
    virtual void close() = 0;
};

class HostConnector {
public:
    virtual ~HostConnector() = default;
    // Throws HostAuthFailed or HostUnavailable.
    virtual std::unique_ptr<HostSession> connect(const std::string& username, const std::string& password) = 0;
};

class SshHostConnector final : public HostConnector {
public:
    SshHostConnector(Endpoint host, std::string fingerprint);
    std::unique_ptr<HostSession> connect(const std::string& username, const std::string& password) override;

private:
    Endpoint host_;
    std::string fingerprint_;
};

}  // namespace sshdecoy
