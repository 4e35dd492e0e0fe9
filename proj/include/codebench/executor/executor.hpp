#pragma once

#include "codebench/executor/environment.hpp"
#include "codebench/util/jsonl.hpp"

#include <atomic>
#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace codebench::executor {

enum class ExecStatus { passed, failed_assert, compile_error, runtime_error, timeout, infra_error };

std::string to_string(ExecStatus s);
ExecStatus parse_exec_status(const std::string& s);

struct AssertOutcome {
    std::size_t index;  // 1-based, in execution order
    bool passed;

    bool operator==(const AssertOutcome&) const = default;
};

struct ExecutionJob {
    std::string program;
    std::string test_code;
    std::vector<std::string> dependencies;
    std::chrono::duration<double> timeout{30.0};
    bool collect_coverage = false;
    bool network_allowed = false;
};

struct ExecutionReport {
    ExecStatus status = ExecStatus::infra_error;
    std::vector<AssertOutcome> per_assert;
    std::string stderr_tail;
    double duration = 0.0;
    std::optional<double> line_coverage;
    std::string error;  // shim or supervisor message; empty when none

    [[nodiscard]] bool passed() const { return status == ExecStatus::passed; }
    [[nodiscard]] std::optional<std::size_t> first_failing_assert() const;
};

json to_json(const ExecutionReport& r);
ExecutionReport report_from_json(const json& j);

/// Verdict record parsed from the shim's last stdout line.
struct ShimVerdict {
    ExecStatus status;
    std::vector<int> asserts;
    std::optional<double> coverage;
    std::optional<std::string> error;
};

class ShimProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Validates and parses the final non-empty line of shim stdout. Throws ShimProtocolError.
ShimVerdict parse_shim_output(const std::string& stdout_text);

constexpr std::chrono::seconds pipeline_timeout{30};
constexpr std::chrono::seconds evaluation_timeout{10};

struct ExecutorConfig {
    /// Shim invocation prefix; the token "{python}" is replaced by the environment's interpreter.
    std::vector<std::string> shim_command;
    std::filesystem::path scratch_root;  // defaults to <tmp>/codebench-exec
    std::size_t stderr_tail_lines = 50;
    bool mask_scratch = true;  // hide sibling job directories via a private mount namespace
};

struct ExecutorStats {
    std::size_t jobs = 0;
    std::size_t network_isolated = 0;
    std::size_t scratch_masked = 0;
};

class Executor {
public:
    explicit Executor(ExecutorConfig config);
    virtual ~Executor() = default;

    /// Runs program + test_code through the shim in a fresh directory. Safe to call concurrently.
    virtual ExecutionReport execute(const ExecutionJob& job, const Environment& env);

    [[nodiscard]] const ExecutorConfig& config() const { return config_; }
    [[nodiscard]] ExecutorStats stats() const;

private:
    ExecutorConfig config_;
    std::atomic<std::size_t> jobs_{0}, network_isolated_{0}, scratch_masked_{0};
};

struct AllSetsResult {
    bool overall = false;  // every set passed
    bool infra = false;    // at least one set hit infra_error
    std::vector<ExecutionReport> reports;
};

/// One process per test set; overall = conjunction of per-set verdicts.
AllSetsResult execute_all_sets(Executor& executor, const std::string& program, const std::vector<std::string>& test_sets,
                               const Environment& env, std::chrono::duration<double> timeout,
                               bool collect_coverage = false);

}  // namespace codebench::executor
