#include "sshdecoy/ssh/transport.hpp"

#include <algorithm>

namespace sshdecoy::ssh {

namespace {

const std::vector<std::string> kKex = {"curve25519-sha256", "curve25519-sha256@libssh.org"};
const std::vector<std::string> kHostKey = {"ssh-ed25519"};
const std::vector<std::string> kCipher = {"aes128-ctr", "aes256-ctr", "aes192-ctr"};
const std::vector<std::string> kMac = {"hmac-sha2-256"};
const std::vector<std::string> kCompression = {"none"};
constexpr std::size_t kMaxPacket = 256 * 1024;

std::string choose(const std::vector<std::string>& client, const std::vector<std::string>& server, const char* what) {
    for (const auto& c : client)
        if (std::find(server.begin(), server.end(), c) != server.end()) return c;
    throw ProtocolError(std::string("no common ") + what + " algorithm");
}

std::size_t cipher_key_size(const std::string& name) {
    return name == "aes128-ctr" ? 16 : name == "aes192-ctr" ? 24 : 32;
}

}  // namespace

Transport::Transport(Socket socket, Role role, TransportOptions options)
    : socket_(std::move(socket)), role_(role), options_(std::move(options)) {}

Transport::~Transport() = default;

void Transport::send_ident() {
    if (ident_sent_) return;
    socket_.write_all(options_.ident + "\r\n");
    ident_sent_ = true;
}

void Transport::read_ident() {
    // Servers may print other lines before the identification line.
    for (int lines = 0; lines < 64; ++lines) {
        std::string line;
        char c = 0;
        while (line.size() < 255) {
            socket_.read_exact(&c, 1);
            if (c == '\n') break;
            line += c;
        }
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (starts_with(line, "SSH-")) {
            if (!starts_with(line, "SSH-2.0-") && !starts_with(line, "SSH-1.99-"))
                throw ProtocolError("unsupported protocol version: " + line);
            peer_ident_ = line;
            return;
        }
        if (role_ == Role::Server) throw ProtocolError("client sent junk before identification");
    }
    throw ProtocolError("no identification line");
}

void Transport::handshake() {
    send_ident();
    read_ident();
    {
        std::lock_guard lock(send_mu_);
        kex_active_ = true;
        my_kexinit_ = kexinit_payload();
        write_packet(my_kexinit_);
    }
    Bytes peer;
    for (;;) {
        peer = read_packet();
        if (!peer.empty() && static_cast<std::uint8_t>(peer[0]) == msg::kKexInit) break;
        if (!peer.empty() && (peer[0] == msg::kIgnore || peer[0] == msg::kDebug)) continue;
        throw ProtocolError("expected KEXINIT");
    }
    key_exchange(std::move(peer));
}

Bytes Transport::kexinit_payload() {
    Writer w;
    w.byte(msg::kKexInit).raw(random_bytes(16));
    w.name_list(kKex).name_list(kHostKey).name_list(kCipher).name_list(kCipher);
    w.name_list(kMac).name_list(kMac).name_list(kCompression).name_list(kCompression);
    w.name_list({}).name_list({}).boolean(false).u32(0);
    return w.take();
}

void Transport::key_exchange(Bytes peer_kexinit) {
    // Called with kex_active_ set and my_kexinit_ already sent.
    Reader r(ByteView(peer_kexinit).substr(17));
    const auto kex = r.name_list();
    const auto hostkey = r.name_list();
    const auto enc_cs = r.name_list();
    const auto enc_sc = r.name_list();
    const auto mac_cs = r.name_list();
    const auto mac_sc = r.name_list();
    const auto comp_cs = r.name_list();
    const auto comp_sc = r.name_list();
    r.name_list();
    r.name_list();
    const bool guess_follows = r.boolean();

    const bool client = role_ == Role::Client;
    auto pick = [&](const std::vector<std::string>& mine, const std::vector<std::string>& theirs, const char* what) {
        return client ? choose(mine, theirs, what) : choose(theirs, mine, what);
    };
    const std::string kex_alg = pick(kKex, kex, "key exchange");
    pick(kHostKey, hostkey, "host key");
    const std::string c_cs = pick(kCipher, enc_cs, "cipher");
    const std::string c_sc = pick(kCipher, enc_sc, "cipher");
    pick(kMac, mac_cs, "mac");
    pick(kMac, mac_sc, "mac");
    pick(kCompression, comp_cs, "compression");
    pick(kCompression, comp_sc, "compression");
    (void)kex_alg;
    if (guess_follows) {
        // A wrong guess is discarded; ours never matches a guess we did not make.
        if (kex.empty() || kex.front() != kKex.front()) read_packet();
    }

    const Bytes& i_c = client ? my_kexinit_ : peer_kexinit;
    const Bytes& i_s = client ? peer_kexinit : my_kexinit_;
    const std::string v_c = client ? options_.ident : peer_ident_;
    const std::string v_s = client ? peer_ident_ : options_.ident;

    X25519Key eph;
    Bytes k_s, q_c, q_s, secret, h;
    auto exchange_hash = [&]() {
        Writer hw;
        hw.string(v_c).string(v_s).string(i_c).string(i_s).string(k_s).string(q_c).string(q_s).mpint(secret);
        return sha256(hw.data());
    };
    if (client) {
        q_c = eph.public_key();
        {
            std::lock_guard lock(send_mu_);
            write_packet(Writer().byte(msg::kKexEcdhInit).string(q_c).take());
        }
        Bytes reply;
        do reply = read_packet();
        while (!reply.empty() && (reply[0] == msg::kIgnore || reply[0] == msg::kDebug));
        Reader rr(reply);
        if (rr.byte() != msg::kKexEcdhReply) throw ProtocolError("expected KEX_ECDH_REPLY");
        k_s = rr.string();
        q_s = rr.string();
        const Bytes sig = rr.string();
        secret = eph.shared_secret(q_s);
        h = exchange_hash();
        if (!verify_signature(k_s, sig, h)) throw ProtocolError("host key signature invalid");
        if (options_.verify_host_key && !options_.verify_host_key(k_s)) {
            disconnect(kDisconnectHostKeyNotVerifiable, "host key mismatch");
            throw Disconnected("host key rejected");
        }
    } else {
        Bytes init;
        do init = read_packet();
        while (!init.empty() && (init[0] == msg::kIgnore || init[0] == msg::kDebug));
        Reader ir(init);
        if (ir.byte() != msg::kKexEcdhInit) throw ProtocolError("expected KEX_ECDH_INIT");
        q_c = ir.string();
        q_s = eph.public_key();
        k_s = options_.host_key->public_blob();
        secret = eph.shared_secret(q_c);
        h = exchange_hash();
        std::lock_guard lock(send_mu_);
        write_packet(Writer().byte(msg::kKexEcdhReply).string(k_s).string(q_s).string(options_.host_key->sign(h)).take());
    }
    if (session_id_.empty()) session_id_ = h;

    const Bytes k_enc = Writer().mpint(secret).take();
    auto derive = [&](char letter, std::size_t len) {
        Bytes key = sha256(k_enc + h + std::string(1, letter) + session_id_);
        while (key.size() < len) key += sha256(k_enc + h + key);
        return key.substr(0, len);
    };
    const std::size_t ks_cs = cipher_key_size(c_cs), ks_sc = cipher_key_size(c_sc);
    const Bytes iv_cs = derive('A', 16), iv_sc = derive('B', 16);
    const Bytes key_cs = derive('C', ks_cs), key_sc = derive('D', ks_sc);
    const Bytes mac_key_cs = derive('E', 32), mac_key_sc = derive('F', 32);

    {
        std::lock_guard lock(send_mu_);
        write_packet(Bytes(1, static_cast<char>(msg::kNewKeys)));
        out_.cipher = std::make_unique<AesCtr>(client ? key_cs : key_sc, client ? iv_cs : iv_sc);
        out_.mac_key = client ? mac_key_cs : mac_key_sc;
        out_.block = 16;
    }
    Bytes nk;
    do nk = read_packet();
    while (!nk.empty() && (nk[0] == msg::kIgnore || nk[0] == msg::kDebug));
    if (nk.size() != 1 || nk[0] != msg::kNewKeys) throw ProtocolError("expected NEWKEYS");
    in_.cipher = std::make_unique<AesCtr>(client ? key_sc : key_cs, client ? iv_sc : iv_cs);
    in_.mac_key = client ? mac_key_sc : mac_key_cs;
    in_.block = 16;
    {
        std::lock_guard lock(send_mu_);
        kex_active_ = false;
        my_kexinit_.clear();
    }
    kex_cv_.notify_all();
}

Bytes Transport::recv() {
    for (;;) {
        Bytes p = read_packet();
        if (p.empty()) continue;
        const auto type = static_cast<std::uint8_t>(p[0]);
        switch (type) {
            case msg::kIgnore:
            case msg::kDebug:
            case msg::kUnimplemented: continue;
            case msg::kDisconnect: {
                Reader r(ByteView(p).substr(1));
                r.u32();
                throw Disconnected("peer disconnected: " + r.string());
            }
            case msg::kKexInit: {
                {
                    std::lock_guard lock(send_mu_);
                    if (!kex_active_) {
                        kex_active_ = true;
                        my_kexinit_ = kexinit_payload();
                        write_packet(my_kexinit_);
                    }
                }
                key_exchange(std::move(p));
                continue;
            }
            default: return p;
        }
    }
}

void Transport::send(ByteView payload) {
    std::unique_lock lock(send_mu_);
    kex_cv_.wait(lock, [&] { return !kex_active_; });
    write_packet(payload);
}

void Transport::disconnect(std::uint32_t reason, const std::string& description) {
    try {
        std::lock_guard lock(send_mu_);
        write_packet(Writer().byte(msg::kDisconnect).u32(reason).string(description).string("").take());
    } catch (const std::exception&) {
    }
}

void Transport::shutdown() {
    socket_.shutdown_both();
    {
        std::lock_guard lock(send_mu_);
        kex_active_ = false;
    }
    kex_cv_.notify_all();
}

Bytes Transport::read_packet() {
    const std::size_t bs = in_.block;
    Bytes first(bs, '\0');
    try {
        socket_.read_exact(first.data(), bs);
    } catch (const NetError& e) {
        throw Disconnected(e.what());
    }
    if (in_.cipher) in_.cipher->apply(first.data(), bs);
    Reader lr(first);
    const std::uint32_t len = lr.u32();
    if (len < 5 || len > kMaxPacket || (len + 4) % bs != 0) throw ProtocolError("bad packet length");
    const std::size_t mac_len = in_.cipher ? 32 : 0;
    Bytes rest(len + 4 - bs + mac_len, '\0');
    try {
        if (!rest.empty()) socket_.read_exact(rest.data(), rest.size());
    } catch (const NetError& e) {
        throw Disconnected(e.what());
    }
    if (in_.cipher) in_.cipher->apply(rest.data(), rest.size() - mac_len);
    Bytes packet = first + rest.substr(0, rest.size() - mac_len);
    if (in_.cipher) {
        const Bytes mac = hmac_sha256(in_.mac_key, Writer().u32(in_.seq).raw(packet).take());
        if (mac != rest.substr(rest.size() - mac_len)) throw ProtocolError("MAC mismatch");
    }
    ++in_.seq;
    const auto pad = static_cast<unsigned char>(packet[4]);
    if (pad + 1u > len) throw ProtocolError("bad padding length");
    return packet.substr(5, len - pad - 1);
}

void Transport::write_packet(ByteView payload) {
    const std::size_t bs = out_.block;
    std::size_t pad = bs - (5 + payload.size()) % bs;
    if (pad < 4) pad += bs;
    Writer w;
    w.u32(static_cast<std::uint32_t>(1 + payload.size() + pad)).byte(static_cast<std::uint8_t>(pad)).raw(payload);
    Bytes packet = w.take();
    packet += out_.cipher ? random_bytes(pad) : Bytes(pad, '\0');
    Bytes mac;
    if (out_.cipher) {
        mac = hmac_sha256(out_.mac_key, Writer().u32(out_.seq).raw(packet).take());
        out_.cipher->apply(packet.data(), packet.size());
    }
    ++out_.seq;
    try {
        socket_.write_all(packet + mac);
    } catch (const NetError& e) {
        throw Disconnected(e.what());
    }
}

}  // namespace sshdecoy::ssh
