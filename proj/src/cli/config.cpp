#include "codebench/cli/config.hpp"

#include "codebench/util/errors.hpp"

#include <fmt/format.h>

#include <set>
#include <type_traits>

namespace codebench::cli {

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed)
{
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw ConfigError(fmt::format("unknown key '{}' in {}", k, where));
    }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key)) return;
    if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        const auto& v = j.at(key);
        if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<long long>() < 0)) throw ConfigError(fmt::format("{}.{} must be a non-negative integer", where, key));
    }
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(fmt::format("{}.{} has the wrong type", where, key));
    }
}

template <typename T>
void read(const json& j, const char* key, std::optional<T>& out, const std::string& where)
{
    if (!j.contains(key) || j.at(key).is_null()) return;
    T v;
    read(j, key, v, where);
    out = std::move(v);
}

void read_path(const json& j, const char* key, std::optional<std::filesystem::path>& out, const std::string& where,
               const std::filesystem::path& base)
{
    std::optional<std::string> s;
    read(j, key, s, where);
    if (s) out = base / *s;
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const
{
    return p.is_absolute() ? p : base_dir / p;
}

std::filesystem::path RunConfig::output(const std::string& name) const
{
    return resolve(output_dir) / name;
}

std::string RunConfig::model_for(const std::string& stage) const
{
    auto it = models.find(stage);
    if (it != models.end() && !it->second.empty()) return it->second;
    it = models.find("default");
    if (it != models.end() && !it->second.empty()) return it->second;
    throw ConfigError("no model configured for stage " + stage);
}

void RunConfig::validate() const
{
    if (jobs == 0) throw ConfigError("jobs must be at least 1");
    if (max_in_flight == 0) throw ConfigError("max_in_flight must be at least 1");
    if (pipeline_timeout_s <= 0 || evaluation_timeout_s <= 0) throw ConfigError("timeouts must be positive");
    if (study_port < 0 || study_port > 65535) throw ConfigError("study port out of range");
    for (const auto& [stage, s] : sampling) {
        if (std::find(pipeline_stages.begin(), pipeline_stages.end(), stage) == pipeline_stages.end())
            throw ConfigError("sampling given for unknown stage " + stage);
        if (s.temperature < 0 || s.top_p <= 0 || s.top_p > 1 || s.n == 0)
            throw ConfigError("sampling parameters out of range for stage " + stage);
    }
    for (const auto& [stage, alias] : models) {
        if (stage != "default" && stage != "eval" &&
            std::find(pipeline_stages.begin(), pipeline_stages.end(), stage) == pipeline_stages.end())
            throw ConfigError("model given for unknown stage " + stage);
    }
    for (const auto& p : {banned_keywords, io_keywords, static_dir}) {
        if (p) require_exists(*p, "path");
    }
}

void require_exists(const std::filesystem::path& p, const std::string& what)
{
    if (!std::filesystem::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir)
{
    RunConfig c;
    c.base_dir = base_dir;
    check_keys(j, "config",
               {"corpus", "output_dir", "limit", "models", "providers", "replay", "caps", "sampling", "timeouts",
                "keywords", "eval", "executor", "study", "jobs", "max_in_flight"});
    read_path(j, "corpus", c.corpus, "config", base_dir);
    if (j.contains("output_dir")) {
        std::string o;
        read(j, "output_dir", o, "config");
        c.output_dir = base_dir / o;
    }
    read(j, "limit", c.limit, "config");
    read(j, "jobs", c.jobs, "config");
    read(j, "max_in_flight", c.max_in_flight, "config");
    read(j, "models", c.models, "config");

    if (j.contains("providers")) {
        const auto& ps = j.at("providers");
        if (!ps.is_object()) throw ConfigError("providers must be an object");
        for (const auto& [alias, p] : ps.items()) {
            std::string where = "providers." + alias;
            check_keys(p, where, {"base_url", "model", "api_key_env", "timeout_s"});
            llm::ProviderConfig pc;
            read(p, "base_url", pc.base_url, where);
            read(p, "model", pc.model, where);
            read(p, "api_key_env", pc.api_key_env, where);
            int timeout = 180;
            read(p, "timeout_s", timeout, where);
            pc.timeout = std::chrono::seconds(timeout);
            if (pc.base_url.empty()) throw ConfigError(where + ".base_url is required");
            c.providers[alias] = pc;
        }
    }
    if (j.contains("replay")) {
        const auto& r = j.at("replay");
        check_keys(r, "replay", {"mode", "transcript"});
        std::string mode = "live";
        read(r, "mode", mode, "replay");
        try {
            c.replay_mode = llm::parse_replay_mode(mode);
        } catch (const std::exception&) {
            throw ConfigError("unknown replay mode " + mode);
        }
        read_path(r, "transcript", c.transcript, "replay", base_dir);
    }
    if (j.contains("caps")) {
        const auto& r = j.at("caps");
        check_keys(r, "caps", {"regenerations", "debug_iterations", "augment_k"});
        read(r, "regenerations", c.regenerations, "caps");
        read(r, "debug_iterations", c.debug_iterations, "caps");
        read(r, "augment_k", c.augment_k, "caps");
    }
    if (j.contains("sampling")) {
        const auto& ss = j.at("sampling");
        if (!ss.is_object()) throw ConfigError("sampling must be an object");
        for (const auto& [stage, s] : ss.items()) {
            std::string where = "sampling." + stage;
            check_keys(s, where, {"temperature", "top_p", "n"});
            SamplingConfig sc;
            read(s, "temperature", sc.temperature, where);
            read(s, "top_p", sc.top_p, where);
            read(s, "n", sc.n, where);
            c.sampling[stage] = sc;
        }
    }
    if (j.contains("timeouts")) {
        const auto& t = j.at("timeouts");
        check_keys(t, "timeouts", {"pipeline_s", "evaluation_s"});
        read(t, "pipeline_s", c.pipeline_timeout_s, "timeouts");
        read(t, "evaluation_s", c.evaluation_timeout_s, "timeouts");
    }
    if (j.contains("keywords")) {
        const auto& k = j.at("keywords");
        check_keys(k, "keywords", {"banned", "io"});
        read_path(k, "banned", c.banned_keywords, "keywords", base_dir);
        read_path(k, "io", c.io_keywords, "keywords", base_dir);
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, "eval", {"n_samples", "temperature", "top_p", "k", "rounds", "stderr_lines"});
        read(e, "n_samples", c.n_samples, "eval");
        read(e, "temperature", c.eval_temperature, "eval");
        read(e, "top_p", c.eval_top_p, "eval");
        read(e, "k", c.k_list, "eval");
        read(e, "rounds", c.rounds, "eval");
        read(e, "stderr_lines", c.stderr_lines, "eval");
    }
    if (j.contains("executor")) {
        const auto& e = j.at("executor");
        check_keys(e, "executor", {"shim", "scratch_dir", "python", "env_cache", "pip_args"});
        read(e, "shim", c.shim_command, "executor");
        read_path(e, "scratch_dir", c.scratch_dir, "executor", base_dir);
        read(e, "python", c.python, "executor");
        read_path(e, "env_cache", c.env_cache, "executor", base_dir);
        read(e, "pip_args", c.pip_args, "executor");
        // Shim arguments that name files next to the config are resolved like other paths.
        for (std::size_t i = 0; i < c.shim_command.size(); ++i) {
            auto& arg = c.shim_command[i];
            if (arg.find('{') == std::string::npos && !arg.empty() && arg[0] != '-' &&
                std::filesystem::exists(base_dir / arg) && !std::filesystem::path(arg).is_absolute())
                arg = (base_dir / arg).string();
        }
    }
    if (j.contains("study")) {
        const auto& s = j.at("study");
        check_keys(s, "study", {"host", "port", "static_dir", "snapshot_every"});
        read(s, "host", c.study_host, "study");
        read(s, "port", c.study_port, "study");
        read_path(s, "static_dir", c.static_dir, "study", base_dir);
        read(s, "snapshot_every", c.snapshot_every, "study");
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    require_exists(path, "config file");
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
    }
    auto base = std::filesystem::absolute(path).parent_path();
    return config_from_json(j, base);
}

}  // namespace codebench::cli
