#include "sshdecoy/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace sshdecoy {

std::string Endpoint::str() const {
    if (host.find(':') != std::string::npos) return "[" + host + "]:" + std::to_string(port);
    return host + ":" + std::to_string(port);
}

std::optional<Endpoint> parse_endpoint(std::string_view text) {
    Endpoint ep;
    std::optional<std::string_view> port_text;
    if (!text.empty() && text.front() == '[') {
        const auto close = text.find(']');
        if (close == std::string_view::npos) return std::nullopt;
        ep.host = std::string(text.substr(1, close - 1));
        auto rest = text.substr(close + 1);
        if (!rest.empty()) {
            if (rest.front() != ':') return std::nullopt;
            port_text = rest.substr(1);
        }
    } else {
        const auto colon = text.rfind(':');
        if (colon != std::string_view::npos && text.find(':') == colon) {
            ep.host = std::string(text.substr(0, colon));
            port_text = text.substr(colon + 1);
        } else {
            ep.host = std::string(text);
        }
    }
    if (ep.host.empty()) return std::nullopt;
    if (port_text) {
        unsigned port = 0;
        auto [p, ec] = std::from_chars(port_text->data(), port_text->data() + port_text->size(), port);
        if (ec != std::errc() || p != port_text->data() + port_text->size() || port == 0 || port > 65535)
            return std::nullopt;
        ep.port = static_cast<std::uint16_t>(port);
    }
    return ep;
}

const char* to_string(BannerMode mode) {
    switch (mode) {
        case BannerMode::Static: return "static";
        case BannerMode::Mirror: return "mirror";
        case BannerMode::Rewrite: return "rewrite";
    }
    return "?";
}

std::string rewrite_banner(std::string_view host_banner, std::string_view version) {
    std::string line(host_banner);
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    // SSH-protoversion-softwareversion SP comments
    const auto dash = line.find('-', 4);
    if (dash == std::string::npos) return line;
    const auto software_end = std::min(line.find(' ', dash), line.size());
    const auto underscore = line.find('_', dash);
    if (underscore == std::string::npos || underscore > software_end)
        return line.substr(0, software_end) + "_" + std::string(version) + line.substr(software_end);
    return line.substr(0, underscore + 1) + std::string(version) + line.substr(software_end);
}

bool ProxyConfig::is_honey(std::string_view username, std::string_view password) const {
    for (const auto& h : honey_credentials)
        if (h.username == username && h.password == password) return true;
    return false;
}

std::string ConfigError::str() const {
    if (line > 0) return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message;
    return message;
}

namespace {

std::string join_errors(const std::vector<ConfigError>& errors) {
    std::string out = "invalid configuration:";
    for (const auto& e : errors) out += "\n  " + e.str();
    return out;
}

class Loader {
public:
    explicit Loader(std::filesystem::path base_dir) : base_(std::move(base_dir)) {}

    void error(const YAML::Node& at, std::string message) {
        const auto mark = at.Mark();
        if (mark.is_null()) errors_.push_back(ConfigError{std::move(message), 0, 0});
        else errors_.push_back(ConfigError{std::move(message), mark.line + 1, mark.column + 1});
    }
    void error(std::string message) { errors_.push_back(ConfigError{std::move(message), 0, 0}); }
    const std::vector<ConfigError>& errors() const { return errors_; }

    std::optional<std::string> scalar(const YAML::Node& n, const std::string& what) {
        if (!n.IsScalar()) {
            error(n, what + " must be a scalar");
            return std::nullopt;
        }
        return n.Scalar();
    }

    void check_keys(const YAML::Node& map, const std::string& what, std::initializer_list<const char*> keys) {
        for (const auto& kv : map) {
            const std::string key = kv.first.Scalar();
            bool known = false;
            for (const char* k : keys) known |= key == k;
            if (!known) error(kv.first, "unknown key '" + key + "' in " + what);
        }
    }

    std::filesystem::path path(const std::string& p) const {
        std::filesystem::path fp(p);
        if (fp.is_relative() && !base_.empty()) return base_ / fp;
        return fp;
    }

    std::optional<std::chrono::milliseconds> duration(const YAML::Node& n, const std::string& what) {
        auto s = scalar(n, what);
        if (!s) return std::nullopt;
        std::string_view v(*s);
        double scale = 1000;
        if (ends_with(v, "ms")) {
            scale = 1;
            v.remove_suffix(2);
        } else if (ends_with(v, "s")) {
            v.remove_suffix(1);
        } else if (ends_with(v, "m")) {
            scale = 60000;
            v.remove_suffix(1);
        }
        char* end = nullptr;
        const std::string num(v);
        const double d = std::strtod(num.c_str(), &end);
        if (num.empty() || end != num.c_str() + num.size()) {
            error(n, what + ": invalid duration '" + *s + "'");
            return std::nullopt;
        }
        return std::chrono::milliseconds(static_cast<long long>(d * scale));
    }

    std::optional<bool> boolean(const YAML::Node& n, const std::string& what) {
        bool b = false;
        if (!YAML::convert<bool>::decode(n, b)) {
            error(n, what + " must be true or false");
            return std::nullopt;
        }
        return b;
    }

private:
    std::filesystem::path base_;
    std::vector<ConfigError> errors_;
};

std::optional<DecoyEntry> load_inline_decoy(Loader& L, const YAML::Node& n) {
    if (!n.IsMap()) {
        L.error(n, "decoys.inline entries must be maps");
        return std::nullopt;
    }
    L.check_keys(n, "decoys.inline entry", {"path", "mode", "content", "owner", "group", "permissions", "size", "mtime"});
    DecoyEntry e;
    bool ok = true;
    if (!n["path"]) {
        L.error(n, "decoys.inline entry requires 'path'");
        ok = false;
    } else if (auto p = L.scalar(n["path"], "decoys.inline.path")) {
        if (p->empty() || (*p)[0] != '/') {
            L.error(n["path"], "decoy path must be absolute: '" + *p + "'");
            ok = false;
        }
        e.vpath = *p;
    }
    if (n["mode"]) {
        const auto m = L.scalar(n["mode"], "decoys.inline.mode").value_or("");
        if (m == "add") e.mode = DecoyMode::Add;
        else if (m == "override") e.mode = DecoyMode::Override;
        else if (m == "hide") e.mode = DecoyMode::Hide;
        else {
            L.error(n["mode"], "decoy mode must be add, override or hide, not '" + m + "'");
            ok = false;
        }
    }
    if (n["content"]) {
        e.content = L.scalar(n["content"], "decoys.inline.content").value_or("");
        if (e.mode == DecoyMode::Hide && !e.content.empty()) {
            L.error(n["content"], "hide decoys carry no content");
            ok = false;
        }
    }
    if (n["owner"]) e.meta.owner = L.scalar(n["owner"], "owner").value_or("");
    if (n["group"]) e.meta.group = L.scalar(n["group"], "group").value_or("");
    if (n["permissions"]) {
        const auto s = L.scalar(n["permissions"], "permissions").value_or("");
        unsigned perm = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), perm, 8);
        if (s.empty() || ec != std::errc() || p != s.data() + s.size() || perm > 07777) {
            L.error(n["permissions"], "permissions must be an octal mode such as 0644, not '" + s + "'");
            ok = false;
        }
        e.meta.permissions = perm;
    }
    if (n["size"]) {
        const auto s = L.scalar(n["size"], "size").value_or("");
        std::uint64_t size = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), size);
        if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
            L.error(n["size"], "size must be a byte count");
            ok = false;
        }
        e.meta.size = size;
    }
    if (n["mtime"]) {
        const auto s = L.scalar(n["mtime"], "mtime").value_or("");
        if (auto ts = parse_timestamp(s)) {
            e.meta.mtime = *ts;
        } else {
            L.error(n["mtime"], "mtime must be a UTC timestamp like 2019-03-01T12:00:00.000Z");
            ok = false;
        }
    }
    if (!ok) return std::nullopt;
    return e;
}

std::optional<DeceptionRule> load_rule(Loader& L, const YAML::Node& n, std::set<std::string>& names) {
    if (!n.IsMap()) {
        L.error(n, "rules entries must be maps");
        return std::nullopt;
    }
    L.check_keys(n, "rule", {"name", "match", "action", "template", "message"});
    DeceptionRule r;
    bool ok = true;
    if (!n["name"]) {
        L.error(n, "rule requires 'name'");
        ok = false;
    } else {
        r.name = L.scalar(n["name"], "rule name").value_or("");
        if (!names.insert(r.name).second) {
            L.error(n["name"], "duplicate rule name '" + r.name + "'");
            ok = false;
        }
    }
    const YAML::Node match = n["match"];
    if (!match || !match.IsMap() || !match["program"]) {
        L.error(match ? match : n, "rule '" + r.name + "' requires match.program");
        ok = false;
    } else {
        L.check_keys(match, "rule match", {"program", "args"});
        r.program = L.scalar(match["program"], "match.program").value_or("");
        if (match["args"]) {
            r.args = L.scalar(match["args"], "match.args").value_or("");
            try {
                r.args_regex = std::regex(*r.args, std::regex::ECMAScript);
            } catch (const std::regex_error& ex) {
                L.error(match["args"], "rule '" + r.name + "': invalid args pattern: " + ex.what());
                ok = false;
            }
        }
    }
    const std::string action = n["action"] ? L.scalar(n["action"], "action").value_or("") : "";
    if (auto a = rule_action_from_string(action)) {
        r.action = *a;
    } else {
        L.error(n["action"] ? n["action"] : n,
                "rule '" + r.name + "': action must be replace_output, overlay, block or alert");
        ok = false;
    }
    if (n["template"]) r.template_text = L.scalar(n["template"], "template").value_or("");
    if (n["message"]) r.message = L.scalar(n["message"], "message").value_or("");
    if (r.action == RuleAction::ReplaceOutput) {
        if (!n["template"]) {
            L.error(n, "rule '" + r.name + "': replace_output requires 'template'");
            ok = false;
        }
        for (const auto& var : unknown_template_variables(r.template_text)) {
            L.error(n["template"], "rule '" + r.name + "': unknown template variable '" + var + "'");
            ok = false;
        }
    }
    if (r.action == RuleAction::Block && r.message.empty()) r.message = r.program + ": Permission denied";
    if (!ok) return std::nullopt;
    return r;
}

void load_banner(Loader& L, const YAML::Node& n, BannerConfig& b) {
    if (n.IsScalar()) {
        // Shorthand: a bare identification string means static mode.
        b.mode = BannerMode::Static;
        b.value = n.Scalar();
    } else if (n.IsMap()) {
        L.check_keys(n, "banner", {"mode", "value", "version"});
        const auto mode = n["mode"] ? L.scalar(n["mode"], "banner.mode").value_or("") : "static";
        if (mode == "static") b.mode = BannerMode::Static;
        else if (mode == "mirror") b.mode = BannerMode::Mirror;
        else if (mode == "rewrite") b.mode = BannerMode::Rewrite;
        else L.error(n["mode"], "banner.mode must be static, mirror or rewrite, not '" + mode + "'");
        if (n["value"]) b.value = L.scalar(n["value"], "banner.value").value_or("");
        if (n["version"]) b.version = L.scalar(n["version"], "banner.version").value_or("");
        if (b.mode == BannerMode::Rewrite && b.version.empty()) L.error(n, "banner.mode rewrite requires banner.version");
    } else {
        L.error(n, "banner must be a string or a map");
        return;
    }
    if (b.mode == BannerMode::Static) {
        if (!starts_with(b.value, "SSH-2.0-") || b.value.size() > 253 ||
            b.value.find_first_of("\r\n") != std::string::npos)
            L.error(n, "banner value must be a single SSH-2.0- identification line of at most 253 bytes");
    }
    if (b.version.find_first_of(" \r\n-") != std::string::npos)
        L.error(n, "banner.version must not contain spaces or '-'");
}

void load_sinks(Loader& L, const YAML::Node& n, std::vector<SinkConfig>& sinks) {
    if (!n.IsSequence()) {
        L.error(n, "sinks must be a list");
        return;
    }
    for (const auto& s : n) {
        if (!s.IsMap()) {
            L.error(s, "sinks entries must be maps");
            continue;
        }
        L.check_keys(s, "sink", {"type", "path", "database", "user", "password"});
        SinkConfig sc;
        const auto type = s["type"] ? L.scalar(s["type"], "sink type").value_or("") : "file";
        if (type == "file") {
            sc.type = SinkType::File;
            if (!s["path"]) L.error(s, "file sink requires 'path'");
            else sc.path = L.path(L.scalar(s["path"], "sink path").value_or(""));
        } else if (type == "sqlite") {
            sc.type = SinkType::Sqlite;
            const YAML::Node db = s["database"] ? s["database"] : s["path"];
            if (!db) L.error(s, "sqlite sink requires 'database'");
            else sc.path = L.path(L.scalar(db, "sink database").value_or(""));
        } else {
            L.error(s["type"], "sink type must be file or sqlite, not '" + type + "'");
            continue;
        }
        if (s["user"]) sc.user = L.scalar(s["user"], "sink user").value_or("");
        if (s["password"]) sc.password = L.scalar(s["password"], "sink password").value_or("");
        sinks.push_back(std::move(sc));
    }
}

ProxyConfig build(Loader& L, const YAML::Node& root) {
    ProxyConfig c;
    if (!root.IsMap()) {
        L.error(root, "configuration must be a map");
        return c;
    }
    L.check_keys(root, "configuration",
                 {"listen", "host", "host_key", "host_fingerprint", "banner", "prompt", "decoys", "honey_credentials",
                  "rules", "history_skip_mode", "output_timeout", "tab_settle", "sinks", "blocklist", "log_level",
                  "ls_collation"});

    auto endpoint = [&](const char* key, Endpoint& out) {
        if (!root[key]) {
            L.error(root, std::string("missing required key '") + key + "'");
            return false;
        }
        const auto s = L.scalar(root[key], key);
        if (!s) return false;
        if (auto ep = parse_endpoint(*s)) {
            out = *ep;
            return true;
        }
        L.error(root[key], std::string(key) + ": invalid address '" + *s + "' (expected host:port)");
        return false;
    };
    const bool have_listen = endpoint("listen", c.listen);
    const bool have_host = endpoint("host", c.host);
    if (have_listen && have_host && c.listen == c.host) L.error(root["host"], "listen and host must differ");

    if (root["host_key"]) c.host_key = L.path(L.scalar(root["host_key"], "host_key").value_or(""));
    if (root["host_fingerprint"]) {
        c.host_fingerprint = L.scalar(root["host_fingerprint"], "host_fingerprint").value_or("");
        if (!starts_with(c.host_fingerprint, "SHA256:"))
            L.error(root["host_fingerprint"], "host_fingerprint must look like SHA256:<base64>");
    }
    if (root["banner"]) load_banner(L, root["banner"], c.banner);

    if (const auto p = root["prompt"]) {
        if (!p.IsMap()) {
            L.error(p, "prompt must be a map");
        } else {
            L.check_keys(p, "prompt", {"terminators", "override"});
            if (p["terminators"]) {
                c.prompt_terminators = L.scalar(p["terminators"], "prompt.terminators").value_or("");
                if (c.prompt_terminators.empty()) L.error(p["terminators"], "prompt.terminators must not be empty");
            }
            if (p["override"]) {
                c.prompt_override = L.scalar(p["override"], "prompt.override").value_or("");
                try {
                    std::regex re(*c.prompt_override, std::regex::ECMAScript);
                    (void)re;
                } catch (const std::regex_error& ex) {
                    L.error(p["override"], std::string("prompt.override is not a valid pattern: ") + ex.what());
                }
            }
        }
    }

    bool decoys_ok = true;
    if (const auto d = root["decoys"]) {
        if (!d.IsMap()) {
            L.error(d, "decoys must be a map");
            decoys_ok = false;
        } else {
            L.check_keys(d, "decoys", {"add_root", "hide_root", "inline"});
            auto root_dir = [&](const char* key, std::filesystem::path& out) {
                if (!d[key]) return;
                out = L.path(L.scalar(d[key], key).value_or(""));
                std::error_code ec;
                if (!std::filesystem::is_directory(out, ec)) {
                    L.error(d[key], std::string("decoys.") + key + " is not a readable directory: " + out.string());
                    decoys_ok = false;
                }
            };
            root_dir("add_root", c.add_root);
            root_dir("hide_root", c.hide_root);
            if (const auto in = d["inline"]) {
                if (!in.IsSequence()) {
                    L.error(in, "decoys.inline must be a list");
                    decoys_ok = false;
                } else {
                    for (const auto& e : in) {
                        if (auto entry = load_inline_decoy(L, e)) c.inline_decoys.push_back(std::move(*entry));
                        else decoys_ok = false;
                    }
                }
            }
        }
    }
    if (decoys_ok) {
        try {
            c.overlay = std::make_shared<OverlaySnapshot>(OverlaySnapshot::load(c.add_root, c.hide_root, c.inline_decoys));
        } catch (const std::exception& ex) {
            L.error(root["decoys"], std::string("decoys: ") + ex.what());
        }
    }

    if (const auto h = root["honey_credentials"]) {
        if (!h.IsSequence()) {
            L.error(h, "honey_credentials must be a list");
        } else {
            for (const auto& e : h) {
                if (!e.IsMap()) {
                    L.error(e, "honey_credentials entries must be maps");
                    continue;
                }
                L.check_keys(e, "honey credential", {"username", "password"});
                HoneyCredential hc;
                if (e["username"]) hc.username = L.scalar(e["username"], "username").value_or("");
                if (e["password"]) hc.password = L.scalar(e["password"], "password").value_or("");
                if (hc.username.empty()) L.error(e, "honey credential username must not be empty");
                else c.honey_credentials.push_back(std::move(hc));
            }
        }
    }

    if (const auto r = root["rules"]) {
        if (!r.IsSequence()) {
            L.error(r, "rules must be a list");
        } else {
            std::set<std::string> names;
            for (const auto& e : r)
                if (auto rule = load_rule(L, e, names)) c.rules.push_back(std::move(*rule));
        }
    }

    if (const auto m = root["history_skip_mode"]) {
        const auto s = L.scalar(m, "history_skip_mode").value_or("");
        if (s == "space-prefix") c.history_skip_mode = HistorySkipMode::SpacePrefix;
        else if (s == "key-offset") c.history_skip_mode = HistorySkipMode::KeyOffset;
        else L.error(m, "history_skip_mode must be space-prefix or key-offset, not '" + s + "'");
    }
    if (const auto t = root["output_timeout"]) {
        if (auto d = L.duration(t, "output_timeout")) {
            if (d->count() <= 0) L.error(t, "output_timeout must be positive");
            else c.output_timeout = *d;
        }
    }
    if (const auto t = root["tab_settle"]) {
        if (auto d = L.duration(t, "tab_settle")) {
            if (d->count() < 0) L.error(t, "tab_settle must not be negative");
            else c.tab_settle = *d;
        }
    }
    if (root["sinks"]) load_sinks(L, root["sinks"], c.sinks);
    if (const auto b = root["blocklist"]) {
        if (!b.IsMap()) {
            L.error(b, "blocklist must be a map");
        } else {
            L.check_keys(b, "blocklist", {"policy", "seed"});
            if (b["policy"]) {
                const auto s = L.scalar(b["policy"], "blocklist.policy").value_or("");
                if (s == "manual") c.block_policy = BlockPolicy::Manual;
                else if (s == "auto-on-honey") c.block_policy = BlockPolicy::AutoOnHoney;
                else L.error(b["policy"], "blocklist.policy must be manual or auto-on-honey, not '" + s + "'");
            }
            if (const auto seed = b["seed"]) {
                if (!seed.IsSequence()) L.error(seed, "blocklist.seed must be a list of addresses");
                else
                    for (const auto& ip : seed)
                        if (auto s = L.scalar(ip, "blocklist.seed entry")) c.blocklist_seed.push_back(*s);
            }
        }
    }
    if (const auto l = root["log_level"]) {
        const auto s = L.scalar(l, "log_level").value_or("");
        if (s == "error" || s == "warn" || s == "info" || s == "debug") c.log_level = s;
        else L.error(l, "log_level must be error, warn, info or debug, not '" + s + "'");
    }
    if (const auto l = root["ls_collation"]) {
        const auto s = L.scalar(l, "ls_collation").value_or("");
        if (s == "C") c.ls_collation = Collation::C;
        else if (s == "locale") c.ls_collation = Collation::Locale;
        else L.error(l, "ls_collation must be C or locale, not '" + s + "'");
    }
    return c;
}

}  // namespace

ConfigErrors::ConfigErrors(std::vector<ConfigError> errors)
    : std::runtime_error(join_errors(errors)), errors_(std::move(errors)) {}

ProxyConfig parse_config(std::string_view yaml, const std::filesystem::path& base_dir) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(yaml));
    } catch (const YAML::ParserException& ex) {
        throw ConfigErrors({ConfigError{ex.msg, ex.mark.line + 1, ex.mark.column + 1}});
    }
    Loader loader(base_dir);
    ProxyConfig config = build(loader, root);
    if (!loader.errors().empty()) throw ConfigErrors(loader.errors());
    return config;
}

ProxyConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigErrors({ConfigError{"cannot read configuration file " + path.string(), 0, 0}});
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path());
}

std::optional<std::string> process_env(const char* name) {
    if (const char* v = std::getenv(name)) return std::string(v);
    return std::nullopt;
}

void apply_env_overrides(ProxyConfig& config, const EnvLookup& env) {
    const auto user = env("SSHDECOY_DB_USER");
    const auto password = env("SSHDECOY_DB_PASSWORD");
    for (auto& s : config.sinks) {
        if (user) s.user = *user;
        if (password) s.password = *password;
    }
}

}  // namespace sshdecoy
