#pragma once

#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "sshdecoy/net.hpp"
#include "sshdecoy/ssh/crypto.hpp"
#include "sshdecoy/ssh/wire.hpp"

namespace sshdecoy::ssh {

namespace msg {
constexpr std::uint8_t kDisconnect = 1, kIgnore = 2, kUnimplemented = 3, kDebug = 4, kServiceRequest = 5,
                       kServiceAccept = 6, kExtInfo = 7, kKexInit = 20, kNewKeys = 21, kKexEcdhInit = 30,
                       kKexEcdhReply = 31, kUserauthRequest = 50, kUserauthFailure = 51, kUserauthSuccess = 52,
                       kUserauthBanner = 53, kGlobalRequest = 80, kRequestSuccess = 81, kRequestFailure = 82,
                       kChannelOpen = 90, kChannelOpenConfirmation = 91, kChannelOpenFailure = 92,
                       kChannelWindowAdjust = 93, kChannelData = 94, kChannelExtendedData = 95, kChannelEof = 96,
                       kChannelClose = 97, kChannelRequest = 98, kChannelSuccess = 99, kChannelFailure = 100;
}

constexpr std::uint32_t kDisconnectProtocolError = 2;
constexpr std::uint32_t kDisconnectKeyExchangeFailed = 3;
constexpr std::uint32_t kDisconnectHostKeyNotVerifiable = 9;
constexpr std::uint32_t kDisconnectByApplication = 11;
constexpr std::uint32_t kDisconnectNoMoreAuthMethods = 14;

struct Disconnected : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Role { Client, Server };

struct TransportOptions {
    std::string ident;               // our identification line without CR LF
    const HostKey* host_key = nullptr;  // server role
    // Client role: accepts or rejects the server's host key blob.
    std::function<bool(ByteView key_blob)> verify_host_key;
};

// The SSH transport layer over one TCP connection. One thread may call
// recv() while any number of threads call send().
class Transport {
public:
    Transport(Socket socket, Role role, TransportOptions options);
    ~Transport();

    // Sends our identification line only. Used alone by banner probes.
    void send_ident();
    // Identification exchange and the first key exchange.
    void handshake();
    // Next payload above the transport layer. Handles key re-exchange and
    // ignores IGNORE/DEBUG. Throws Disconnected when the peer goes away.
    Bytes recv();
    void send(ByteView payload);
    void disconnect(std::uint32_t reason, const std::string& description);
    // Closes the socket, unblocking a concurrent recv().
    void shutdown();

    const std::string& peer_ident() const { return peer_ident_; }
    const Bytes& session_id() const { return session_id_; }
    std::string peer_ip() const { return socket_.peer_ip(); }
    Socket& socket() { return socket_; }

private:
    struct Direction {
        std::unique_ptr<AesCtr> cipher;
        Bytes mac_key;
        std::uint32_t seq = 0;
        std::size_t block = 8;
    };

    Bytes read_packet();
    void write_packet(ByteView payload);
    Bytes kexinit_payload();
    void key_exchange(Bytes peer_kexinit);
    void read_ident();

    Socket socket_;
    Role role_;
    TransportOptions options_;
    std::string peer_ident_;
    Bytes session_id_;
    Direction in_;
    Direction out_;
    Bytes my_kexinit_;  // sent but not yet consumed by a key exchange

    std::mutex send_mu_;
    std::condition_variable kex_cv_;
    bool kex_active_ = false;
    bool ident_sent_ = false;
};

}  // namespace sshdecoy::ssh
