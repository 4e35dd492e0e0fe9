#pragma once

#include "codebench/executor/environment.hpp"
#include "codebench/llm/gateway.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace codebench::study {
class StudyServer;
}

namespace codebench::cli {

enum ExitCode { exit_ok = 0, exit_content = 1, exit_config = 2, exit_infra = 3 };

/// Injection points for tests and fixture tooling. Empty members use the real services.
struct Hooks {
    /// Backends by model alias; take precedence over configured providers.
    std::map<std::string, std::shared_ptr<llm::ChatBackend>> backends;
    std::shared_ptr<executor::PackageInstaller> installer;
    /// Called once serve-study is listening; the server is stopped when it returns.
    std::function<void(int port, study::StudyServer& server)> on_serving;
};

/// Runs the `codebench` command line. Never throws; errors are reported on `err` and mapped
/// onto the exit codes above.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const Hooks& hooks = {});

}  // namespace codebench::cli
