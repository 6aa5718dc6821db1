#include <csignal>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "sshdecoy/config.hpp"
#include "sshdecoy/proxy.hpp"
#include "sshdecoy/ssh/endpoint.hpp"

using namespace sshdecoy;

namespace {

void setup_logging(const std::string& level) {
    auto logger = spdlog::stderr_color_mt("sshdecoy");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(level));
}

ProxyConfig load(const std::string& path) {
    ProxyConfig config = load_config(path);
    apply_env_overrides(config, process_env);
    return config;
}

int run(const std::string& path, const std::string& level) {
    ProxyConfig config = load(path);
    setup_logging(level.empty() ? config.log_level : level);

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::signal(SIGPIPE, SIG_IGN);

    if (config.banner.mode == BannerMode::Static) {
        try {
            ssh::grab_banner(config.host, std::chrono::seconds(3));
        } catch (const std::exception& e) {
            spdlog::warn("host {} not reachable yet: {}", config.host.str(), e.what());
        }
    }
    auto recorder = make_recorder(config);
    ProxyServer proxy(config, recorder);
    proxy.start();
    spdlog::info("{} decoys, {} rules, {} honey credentials, {} sinks", config.overlay->size(), config.rules.size(),
                 config.honey_credentials.size(), config.sinks.size());
    int sig = 0;
    sigwait(&signals, &sig);
    spdlog::info("signal {}, shutting down", sig);
    proxy.stop();
    return 0;
}

int check(const std::string& path) {
    const ProxyConfig config = load(path);
    std::cout << "configuration OK\n"
              << "  listen:  " << config.listen.str() << "\n"
              << "  host:    " << config.host.str() << "\n"
              << "  banner:  " << to_string(config.banner.mode) << "\n"
              << "  decoys:  " << config.overlay->size() << "\n"
              << "  honey:   " << config.honey_credentials.size() << "\n"
              << "  rules:   " << config.rules.size() << "\n"
              << "  sinks:   " << config.sinks.size() << "\n";
    return 0;
}

int mirror_banner(const std::string& host, const std::string& path) {
    Endpoint to;
    if (!host.empty()) {
        auto e = parse_endpoint(host);
        if (!e) {
            std::cerr << "invalid endpoint: " << host << "\n";
            return 2;
        }
        to = *e;
    } else {
        to = load(path).host;
    }
    std::cout << ssh::grab_banner(to) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SSH deception reverse proxy"};
    app.require_subcommand(1);
    std::string level;
    app.add_option("--log-level", level, "error, warn, info or debug")
        ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

    std::string config_path;
    auto* run_cmd = app.add_subcommand("run", "Run the proxy");
    run_cmd->add_option("--config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
    auto* check_cmd = app.add_subcommand("check", "Validate a configuration file");
    check_cmd->add_option("--config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
    std::string host;
    auto* banner_cmd = app.add_subcommand("mirror-banner", "Print a host's SSH identification line");
    banner_cmd->add_option("--host", host, "host:port to probe");
    banner_cmd->add_option("--config", config_path, "Take the host from this configuration")->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run_cmd) return run(config_path, level);
        if (*check_cmd) return check(config_path);
        if (host.empty() && config_path.empty()) {
            std::cerr << "mirror-banner needs --host or --config\n";
            return 2;
        }
        return mirror_banner(host, config_path);
    } catch (const ConfigErrors& e) {
        for (const auto& err : e.errors()) std::cerr << config_path << ": " << err.str() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
