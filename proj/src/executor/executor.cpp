#include "codebench/executor/executor.hpp"

#include "codebench/executor/process.hpp"
#include "codebench/util/text.hpp"

#include <cstdlib>
#include <cstring>
#include <fmt/format.h>
#include <signal.h>

namespace codebench::executor {

std::string to_string(ExecStatus s)
{
    switch (s) {
    case ExecStatus::passed: return "passed";
    case ExecStatus::failed_assert: return "failed_assert";
    case ExecStatus::compile_error: return "compile_error";
    case ExecStatus::runtime_error: return "runtime_error";
    case ExecStatus::timeout: return "timeout";
    case ExecStatus::infra_error: return "infra_error";
    }
    return "?";
}

ExecStatus parse_exec_status(const std::string& s)
{
    for (auto st : {ExecStatus::passed, ExecStatus::failed_assert, ExecStatus::compile_error, ExecStatus::runtime_error,
                    ExecStatus::timeout, ExecStatus::infra_error}) {
        if (to_string(st) == s) return st;
    }
    throw std::invalid_argument("unknown execution status '" + s + "'");
}

std::optional<std::size_t> ExecutionReport::first_failing_assert() const
{
    for (const auto& a : per_assert) {
        if (!a.passed) return a.index;
    }
    return std::nullopt;
}

json to_json(const ExecutionReport& r)
{
    json per_assert = json::array();
    for (const auto& a : r.per_assert) per_assert.push_back({a.index, a.passed});
    json j = {
        {"status", to_string(r.status)},
        {"per_assert", per_assert},
        {"stderr_tail", r.stderr_tail},
        {"duration", r.duration},
        {"error", r.error},
    };
    j["line_coverage"] = r.line_coverage ? json(*r.line_coverage) : json(nullptr);
    return j;
}

ExecutionReport report_from_json(const json& j)
{
    ExecutionReport r;
    r.status = parse_exec_status(j.at("status").get<std::string>());
    for (const auto& a : j.at("per_assert")) r.per_assert.push_back({a.at(0).get<std::size_t>(), a.at(1).get<bool>()});
    r.stderr_tail = j.value("stderr_tail", std::string{});
    r.duration = j.value("duration", 0.0);
    r.error = j.value("error", std::string{});
    if (j.contains("line_coverage") && !j["line_coverage"].is_null()) r.line_coverage = j["line_coverage"].get<double>();
    return r;
}

ShimVerdict parse_shim_output(const std::string& stdout_text)
{
    auto lines = text::split_lines(stdout_text);
    std::string last;
    for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
        if (!text::is_blank(*it)) {
            last = std::string(text::trim(*it));
            break;
        }
    }
    if (last.empty()) throw ShimProtocolError("no verdict line on stdout");
    json j;
    try {
        j = json::parse(last);
    } catch (const json::parse_error&) {
        throw ShimProtocolError("verdict line is not JSON: " + last.substr(0, 200));
    }
    if (!j.is_object()) throw ShimProtocolError("verdict is not an object");
    for (const char* key : {"status", "asserts", "coverage", "error"}) {
        if (!j.contains(key)) throw ShimProtocolError(std::string("verdict lacks field '") + key + "'");
    }
    ShimVerdict v;
    if (!j["status"].is_string()) throw ShimProtocolError("status is not a string");
    try {
        v.status = parse_exec_status(j["status"].get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ShimProtocolError(e.what());
    }
    if (v.status == ExecStatus::infra_error) throw ShimProtocolError("shim may not report infra_error");
    if (!j["asserts"].is_array()) throw ShimProtocolError("asserts is not an array");
    for (const auto& a : j["asserts"]) {
        if (!a.is_number_integer() || (a.get<int>() != 0 && a.get<int>() != 1)) {
            throw ShimProtocolError("asserts entries must be 0 or 1");
        }
        v.asserts.push_back(a.get<int>());
    }
    if (!j["coverage"].is_null()) {
        if (!j["coverage"].is_number()) throw ShimProtocolError("coverage is not a number");
        double c = j["coverage"].get<double>();
        if (c < 0.0 || c > 1.0) throw ShimProtocolError("coverage outside [0,1]");
        v.coverage = c;
    }
    if (!j["error"].is_null()) {
        if (!j["error"].is_string()) throw ShimProtocolError("error is not a string");
        v.error = j["error"].get<std::string>();
    }
    bool any_failed = std::find(v.asserts.begin(), v.asserts.end(), 0) != v.asserts.end();
    if (v.status == ExecStatus::passed && any_failed) throw ShimProtocolError("passed verdict with a failed assert");
    if (v.status == ExecStatus::failed_assert && !any_failed) {
        throw ShimProtocolError("failed_assert verdict without a failed assert");
    }
    return v;
}

Executor::Executor(ExecutorConfig config) : config_(std::move(config))
{
    if (config_.shim_command.empty()) throw ConfigError("executor needs a shim command");
    if (config_.scratch_root.empty()) config_.scratch_root = std::filesystem::temp_directory_path() / "codebench-exec";
    std::filesystem::create_directories(config_.scratch_root);
    std::filesystem::permissions(config_.scratch_root, std::filesystem::perms::owner_all,
                                 std::filesystem::perm_options::replace);
    config_.scratch_root = std::filesystem::canonical(config_.scratch_root);
}

ExecutorStats Executor::stats() const
{
    return {jobs_.load(), network_isolated_.load(), scratch_masked_.load()};
}

namespace {

class ScratchDir {
public:
    explicit ScratchDir(const std::filesystem::path& root)
    {
        std::string tmpl = (root / "job-XXXXXX").string();
        if (::mkdtemp(tmpl.data()) == nullptr) {
            throw InfrastructureError(fmt::format("mkdtemp under {}: {}", root.string(), std::strerror(errno)));
        }
        path_ = tmpl;
    }
    ~ScratchDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

std::string signal_name(int sig)
{
    const char* d = ::sigdescr_np(sig);
    return d ? fmt::format("{} ({})", sig, d) : std::to_string(sig);
}

}  // namespace

ExecutionReport Executor::execute(const ExecutionJob& job, const Environment& env)
{
    if (job.timeout.count() <= 0.0) throw std::invalid_argument("execution timeout must be positive");
    if (job.program.empty() || job.test_code.empty()) throw std::invalid_argument("program and test code must be non-empty");
    ++jobs_;

    ScratchDir dir(config_.scratch_root);
    SpawnOptions opt;
    for (const auto& part : config_.shim_command) {
        opt.argv.push_back(part == "{python}" ? env.python.string() : part);
    }
    if (opt.argv[0].empty() || opt.argv[0][0] != '/') {
        auto found = find_executable(opt.argv[0]);
        if (!found) throw ConfigError("shim executable '" + opt.argv[0] + "' not found");
        opt.argv[0] = found->string();
    }
    opt.argv.push_back((dir.path() / "solution_under_test").string());
    opt.argv.push_back((dir.path() / "tests").string());
    opt.argv.push_back("--timeout-soft");
    opt.argv.push_back(fmt::format("{:g}", job.timeout.count()));
    opt.argv.push_back("--coverage");
    opt.argv.push_back(job.collect_coverage ? "on" : "off");

    const std::string home = dir.path().string();
    opt.env = {"PATH=/usr/local/bin:/usr/bin:/bin", "HOME=" + home, "TMPDIR=" + home, "LANG=C.UTF-8",
               "LC_ALL=C.UTF-8", "PYTHONDONTWRITEBYTECODE=1", "PYTHONHASHSEED=0", "PYTHONIOENCODING=utf-8",
               "PYTHONNOUSERSITE=1"};
    if (!env.site_dir.empty()) opt.env.push_back("PYTHONPATH=" + env.site_dir.string());
    if (!job.network_allowed) {
        // Second line of defence where namespaces are unavailable: point proxies at a dead port.
        for (const char* var : {"http_proxy", "https_proxy", "HTTP_PROXY", "HTTPS_PROXY", "ALL_PROXY"}) {
            opt.env.push_back(std::string(var) + "=http://127.0.0.1:9");
        }
    }
    opt.cwd = dir.path();
    opt.isolate_network = !job.network_allowed;
    if (config_.mask_scratch) opt.mask_root = config_.scratch_root;
    opt.files = {{"solution_under_test", job.program}, {"tests", job.test_code}};
    const double grace = std::min(1.0, job.timeout.count() / 4.0);
    opt.timeout = std::chrono::duration<double>(job.timeout.count() + grace);

    auto res = spawn_and_wait(opt);
    if (res.isolation & isolation_network) ++network_isolated_;
    if (res.isolation & isolation_mounts) ++scratch_masked_;

    ExecutionReport report;
    report.duration = res.seconds;
    report.stderr_tail = text::tail_lines(res.err, config_.stderr_tail_lines);

    if (res.timed_out) {
        report.status = ExecStatus::timeout;
        report.error = fmt::format("killed after {:.1f}s (limit {:g}s)", res.seconds, job.timeout.count());
        return report;
    }
    if (res.term_signal != 0) {
        report.status = ExecStatus::runtime_error;
        report.error = "process terminated by signal " + signal_name(res.term_signal);
        return report;
    }
    if (res.exit_code != 0) {
        report.status = ExecStatus::infra_error;
        report.error = fmt::format("shim exited with status {}", res.exit_code);
        return report;
    }
    try {
        ShimVerdict v = parse_shim_output(res.out);
        report.status = v.status;
        for (std::size_t i = 0; i < v.asserts.size(); ++i) report.per_assert.push_back({i + 1, v.asserts[i] == 1});
        if (job.collect_coverage && v.status != ExecStatus::compile_error) report.line_coverage = v.coverage;
        report.error = v.error.value_or("");
    } catch (const ShimProtocolError& e) {
        report.status = ExecStatus::infra_error;
        report.error = std::string("shim protocol violation: ") + e.what();
    }
    return report;
}

AllSetsResult execute_all_sets(Executor& executor, const std::string& program, const std::vector<std::string>& test_sets,
                               const Environment& env, std::chrono::duration<double> timeout, bool collect_coverage)
{
    if (test_sets.empty()) throw std::invalid_argument("execute_all_sets needs at least one test set");
    AllSetsResult result;
    result.overall = true;
    for (const auto& tests : test_sets) {
        ExecutionJob job;
        job.program = program;
        job.test_code = tests;
        job.timeout = timeout;
        job.collect_coverage = collect_coverage;
        result.reports.push_back(executor.execute(job, env));
        const auto& r = result.reports.back();
        if (r.status == ExecStatus::infra_error) result.infra = true;
        if (!r.passed()) result.overall = false;
    }
    return result;
}

}  // namespace codebench::executor
