#pragma once

#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>

#include "sshdecoy/bytes.hpp"

typedef struct evp_pkey_st EVP_PKEY;
typedef struct evp_cipher_ctx_st EVP_CIPHER_CTX;

namespace sshdecoy::ssh {

struct CryptoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

Bytes random_bytes(std::size_t n);
Bytes sha256(ByteView data);
Bytes hmac_sha256(ByteView key, ByteView data);
std::string base64_encode(ByteView data, bool pad = true);
Bytes base64_decode(std::string_view text);

struct PkeyDeleter {
    void operator()(EVP_PKEY* k) const;
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;

// Ephemeral key for curve25519 key exchange.
class X25519Key {
public:
    X25519Key();
    const Bytes& public_key() const { return public_; }
    // Raw 32-byte shared secret; throws on an invalid peer key.
    Bytes shared_secret(ByteView peer_public) const;

private:
    PkeyPtr key_;
    Bytes public_;
};

// Ed25519 host key.
class HostKey {
public:
    static HostKey generate();
    static HostKey from_seed(ByteView seed32);
    // PEM (PKCS#8) or unencrypted OpenSSH private key files.
    static HostKey load(const std::filesystem::path& path);
    // Loads the key, or generates and stores a new one when the file is missing.
    static HostKey load_or_create(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    Bytes public_blob() const;  // string "ssh-ed25519", string key
    Bytes sign(ByteView data) const;  // signature blob
    std::string fingerprint() const;

private:
    PkeyPtr key_;
    Bytes public_;
};

// "SHA256:<base64 without padding>" of a public key blob.
std::string fingerprint(ByteView key_blob);
// Verifies an ssh-ed25519 signature blob made with the given public key blob.
bool verify_signature(ByteView key_blob, ByteView signature_blob, ByteView data);

class AesCtr {
public:
    AesCtr(ByteView key, ByteView iv);
    ~AesCtr();
    AesCtr(const AesCtr&) = delete;
    AesCtr& operator=(const AesCtr&) = delete;
    void apply(char* data, std::size_t n);

private:
    EVP_CIPHER_CTX* ctx_;
};

}  // namespace sshdecoy::ssh
