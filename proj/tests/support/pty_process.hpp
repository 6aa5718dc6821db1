#pragma once

#include <chrono>
#include <string>
#include <vector>

namespace sshdecoy::testing {

// A child process on a pseudo-terminal.
class PtyProcess {
public:
    PtyProcess(const std::vector<std::string>& argv, const std::vector<std::string>& env, int cols = 80,
               int rows = 24);
    ~PtyProcess();
    PtyProcess(const PtyProcess&) = delete;
    PtyProcess& operator=(const PtyProcess&) = delete;

    void write(const std::string& bytes);
    // Reads until `needle` appears in the output after `from`; false on timeout or exit.
    bool read_until(const std::string& needle, std::chrono::milliseconds timeout, std::size_t from = 0);
    const std::string& output() const { return out_; }
    void signal(int sig);
    int wait();

private:
    int fd_ = -1;
    int pid_ = -1;
    std::string out_;
};

}  // namespace sshdecoy::testing
