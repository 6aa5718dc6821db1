#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sshdecoy/command_handlers.hpp"
#include "sshdecoy/decoy_overlay.hpp"
#include "sshdecoy/events.hpp"
#include "sshdecoy/ls_format.hpp"

namespace sshdecoy {

inline constexpr const char* kDefaultBanner = "SSH-2.0-OpenSSH_7.9p1 Debian-10+deb10u2";

struct Endpoint {
    std::string host;
    std::uint16_t port = 22;

    std::string str() const;
    bool operator==(const Endpoint&) const = default;
};

// "host:port", "[v6]:port" or "host" (port 22).
std::optional<Endpoint> parse_endpoint(std::string_view text);

enum class BannerMode { Static, Mirror, Rewrite };
const char* to_string(BannerMode mode);

struct BannerConfig {
    BannerMode mode = BannerMode::Static;
    std::string value = kDefaultBanner;  // Static
    std::string version;                 // Rewrite: replaces the host's software version
};

// Replaces the version after the first '_' of the software token of an
// identification line: "SSH-2.0-OpenSSH_8.9p1 Ubuntu-3" + "8.4p1" ->
// "SSH-2.0-OpenSSH_8.4p1 Ubuntu-3". Without '_' the version is appended.
std::string rewrite_banner(std::string_view host_banner, std::string_view version);

enum class HistorySkipMode { SpacePrefix, KeyOffset };

struct HoneyCredential {
    std::string username;
    std::string password;
};

enum class SinkType { File, Sqlite };

struct SinkConfig {
    SinkType type = SinkType::File;
    std::filesystem::path path;  // file path or database file
    std::string user;
    std::string password;
};

struct ProxyConfig {
    Endpoint listen;
    Endpoint host;
    std::filesystem::path host_key;  // empty: ephemeral key
    std::string host_fingerprint;    // "SHA256:<base64>" pin for the host key, optional
    BannerConfig banner;
    std::string prompt_terminators = "$#";
    std::optional<std::string> prompt_override;
    std::filesystem::path add_root;
    std::filesystem::path hide_root;
    std::vector<DecoyEntry> inline_decoys;
    std::vector<HoneyCredential> honey_credentials;
    std::vector<DeceptionRule> rules;
    HistorySkipMode history_skip_mode = HistorySkipMode::SpacePrefix;
    std::chrono::milliseconds output_timeout{30000};
    std::chrono::milliseconds tab_settle{150};
    std::vector<SinkConfig> sinks;
    BlockPolicy block_policy = BlockPolicy::Manual;
    std::vector<std::string> blocklist_seed;
    std::string log_level = "info";
    Collation ls_collation = Collation::C;

    std::shared_ptr<const OverlaySnapshot> overlay = std::make_shared<OverlaySnapshot>();

    bool is_honey(std::string_view username, std::string_view password) const;
};

struct ConfigError {
    std::string message;
    int line = 0;    // 1-based, 0 when unknown
    int column = 0;  // 1-based, 0 when unknown

    std::string str() const;
};

class ConfigErrors : public std::runtime_error {
public:
    explicit ConfigErrors(std::vector<ConfigError> errors);
    const std::vector<ConfigError>& errors() const { return errors_; }

private:
    std::vector<ConfigError> errors_;
};

// Parses and validates a YAML configuration. Relative paths are taken
// relative to base_dir. Throws ConfigErrors listing every problem found.
ProxyConfig parse_config(std::string_view yaml, const std::filesystem::path& base_dir = {});
ProxyConfig load_config(const std::filesystem::path& path);

// Applies SSHDECOY_DB_USER / SSHDECOY_DB_PASSWORD to every sink.
using EnvLookup = std::function<std::optional<std::string>(const char*)>;
void apply_env_overrides(ProxyConfig& config, const EnvLookup& env);
std::optional<std::string> process_env(const char* name);

}  // namespace sshdecoy
