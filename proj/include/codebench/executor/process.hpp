#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace codebench::executor {

struct SpawnOptions {
    std::vector<std::string> argv;  // argv[0] must be an absolute path
    std::vector<std::string> env;   // complete environment, KEY=VALUE
    std::filesystem::path cwd;      // created by the caller
    std::chrono::duration<double> timeout{30.0};
    bool isolate_network = false;
    /// When set, the child gets a private mount namespace in which this directory is replaced by
    /// an empty tmpfs holding only a re-created `cwd` (cwd must lie directly beneath it).
    std::optional<std::filesystem::path> mask_root;
    /// Files written into cwd by the child itself before exec (after masking).
    std::vector<std::pair<std::string, std::string>> files;
    std::size_t output_limit = 4 << 20;  // bytes kept per stream
};

enum IsolationFlags : unsigned {
    isolation_none = 0,
    isolation_network = 1,
    isolation_mounts = 2,
};

struct SpawnResult {
    bool timed_out = false;
    int exit_code = -1;  // -1 when terminated by a signal
    int term_signal = 0;
    std::string out;
    std::string err;
    double seconds = 0.0;
    unsigned isolation = isolation_none;
};

/// fork/exec in a new process group; the whole group is SIGKILLed at the deadline and after
/// the leader exits. Throws InfrastructureError when the child cannot be started.
SpawnResult spawn_and_wait(const SpawnOptions& options);

/// Absolute path of an executable found on PATH (or the argument itself if it contains '/').
std::optional<std::filesystem::path> find_executable(const std::string& name);

}  // namespace codebench::executor
