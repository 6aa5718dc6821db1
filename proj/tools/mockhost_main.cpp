#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "sshdecoy/mock_ssh_server.hpp"

using namespace sshdecoy;

int main(int argc, char** argv) {
    CLI::App app{"Scripted SSH host for exercising the proxy"};
    std::string script_path;
    std::string listen = "127.0.0.1:2222";
    app.add_option("--script", script_path, "Mock host script (YAML)")->check(CLI::ExistingFile);
    app.add_option("--listen", listen, "Address to listen on");
    CLI11_PARSE(app, argc, argv);

    const auto at = parse_endpoint(listen);
    if (!at) {
        std::cerr << "invalid endpoint: " << listen << "\n";
        return 2;
    }
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::signal(SIGPIPE, SIG_IGN);
    try {
        MockSshServer server(script_path.empty() ? MockScript::standard() : MockScript::load(script_path), *at);
        std::cout << "mock host on " << server.endpoint().host << ":" << server.endpoint().port << ", key "
                  << server.host_key().fingerprint() << std::endl;
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
