#include "codebench/executor/environment.hpp"

#include "codebench/executor/process.hpp"
#include "codebench/util/hash.hpp"
#include "codebench/util/jsonl.hpp"
#include "codebench/util/text.hpp"

#include <algorithm>
#include <cctype>
#include <fmt/format.h>
#include <set>

namespace codebench::executor {

std::string normalize_package_name(const std::string& name)
{
    std::string out;
    bool sep = false;
    for (char c : name) {
        if (c == '-' || c == '_' || c == '.') {
            sep = true;
            continue;
        }
        if (sep && !out.empty()) out += '-';
        sep = false;
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string Requirement::str() const
{
    std::string s = name + extras + specifier;
    if (!marker.empty()) s += "; " + marker;
    return s;
}

Requirement parse_requirement(const std::string& raw)
{
    std::string line{text::trim(raw)};
    Requirement r;
    if (auto semi = line.find(';'); semi != std::string::npos) {
        r.marker = std::string(text::trim(line.substr(semi + 1)));
        line = std::string(text::trim(line.substr(0, semi)));
    }
    std::size_t i = 0;
    while (i < line.size() && (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '-' || line[i] == '_' ||
                               line[i] == '.')) {
        ++i;
    }
    if (i == 0) throw std::invalid_argument("invalid requirement '" + raw + "'");
    r.name = normalize_package_name(line.substr(0, i));
    std::string rest;
    for (char c : line.substr(i)) {
        if (!std::isspace(static_cast<unsigned char>(c))) rest += c;
    }
    if (!rest.empty() && rest[0] == '[') {
        auto close = rest.find(']');
        if (close == std::string::npos) throw std::invalid_argument("unterminated extras in '" + raw + "'");
        r.extras = rest.substr(0, close + 1);
        rest = rest.substr(close + 1);
    }
    if (!rest.empty() && std::string("=<>!~").find(rest[0]) == std::string::npos) {
        throw std::invalid_argument("invalid version specifier in '" + raw + "'");
    }
    r.specifier = rest;
    return r;
}

std::vector<Requirement> resolve_requirements(const std::vector<std::string>& requirements)
{
    std::map<std::string, Requirement> by_name;
    std::map<std::string, std::string> origin;
    std::vector<std::string> conflicts;
    for (const auto& raw : requirements) {
        Requirement r = parse_requirement(raw);
        auto it = by_name.find(r.name);
        if (it == by_name.end()) {
            by_name.emplace(r.name, r);
            origin[r.name] = raw;
            continue;
        }
        Requirement& have = it->second;
        if (r.specifier.empty() || r.specifier == have.specifier) continue;
        if (have.specifier.empty()) {
            have.specifier = r.specifier;
            origin[r.name] = raw;
            continue;
        }
        conflicts.push_back(fmt::format("{}: '{}' conflicts with '{}'", r.name, origin[r.name], raw));
    }
    if (!conflicts.empty()) {
        throw DependencyConflict("dependency conflict: " + conflicts.front(), text::join(conflicts, "\n"));
    }
    std::vector<Requirement> out;
    for (auto& [name, r] : by_name) out.push_back(std::move(r));
    return out;
}

MergeResult merge_requirements(const std::vector<std::vector<std::string>>& lists)
{
    MergeResult result;
    std::map<std::string, std::size_t> index;
    std::vector<Requirement> merged;
    for (const auto& list : lists) {
        for (const auto& raw : list) {
            Requirement r = parse_requirement(raw);
            auto it = index.find(r.name);
            if (it == index.end()) {
                index.emplace(r.name, merged.size());
                merged.push_back(r);
                continue;
            }
            Requirement& have = merged[it->second];
            if (r.specifier.empty() || r.specifier == have.specifier) continue;
            if (have.specifier.empty()) {
                have.specifier = r.specifier;
                continue;
            }
            result.overridden.push_back(r.str());
        }
    }
    for (const auto& r : merged) result.requirements.push_back(r.str());
    return result;
}

void PipInstaller::install(const std::vector<Requirement>& requirements, const std::filesystem::path& target,
                           const std::filesystem::path& python)
{
    SpawnOptions opt;
    opt.argv = {python.string(), "-m", "pip", "install", "--disable-pip-version-check", "--no-input",
                "--target", target.string()};
    opt.argv.insert(opt.argv.end(), extra_args_.begin(), extra_args_.end());
    for (const auto& r : requirements) opt.argv.push_back(r.str());
    opt.cwd = target;
    opt.timeout = std::chrono::minutes(30);
    for (const char* var : {"PATH", "HOME", "PIP_INDEX_URL", "PIP_EXTRA_INDEX_URL", "PIP_TRUSTED_HOST",
                            "PIP_CONFIG_FILE", "HTTP_PROXY", "HTTPS_PROXY", "NO_PROXY", "http_proxy",
                            "https_proxy", "no_proxy", "SSL_CERT_FILE"}) {
        if (const char* v = std::getenv(var)) opt.env.push_back(std::string(var) + "=" + v);
    }
    auto res = spawn_and_wait(opt);
    if (res.timed_out || res.exit_code != 0) {
        std::string trace = res.out + res.err;
        bool conflict = trace.find("ResolutionImpossible") != std::string::npos ||
                        trace.find("conflicting dependencies") != std::string::npos;
        std::string message = fmt::format("pip install failed ({})", res.timed_out ? "timeout" : fmt::format("exit {}", res.exit_code));
        if (conflict) throw DependencyConflict("dependency conflict reported by pip", trace);
        throw EnvironmentError(message, trace);
    }
}

EnvironmentManager::EnvironmentManager(std::filesystem::path cache_root, std::shared_ptr<PackageInstaller> installer,
                                       const std::string& python)
    : cache_root_(std::move(cache_root)), installer_(std::move(installer))
{
    auto found = find_executable(python);
    if (!found) throw ConfigError("python interpreter '" + python + "' not found");
    python_ = std::filesystem::canonical(*found);
    std::filesystem::create_directories(cache_root_);
}

std::size_t EnvironmentManager::installs() const
{
    std::lock_guard lock(mutex_);
    return installs_;
}

std::shared_ptr<const Environment> EnvironmentManager::build(const std::vector<std::string>& requirements)
{
    auto resolved = resolve_requirements(requirements);
    std::vector<std::string> canonical;
    for (const auto& r : resolved) canonical.push_back(r.str());
    const std::string key = sha256_hex(python_.string() + "\n" + text::join(canonical, "\n")).substr(0, 24);

    std::shared_ptr<std::mutex> key_lock;
    {
        std::lock_guard lock(mutex_);
        if (auto it = built_.find(key); it != built_.end()) return it->second;
        auto& slot = key_locks_[key];
        if (!slot) slot = std::make_shared<std::mutex>();
        key_lock = slot;
    }
    std::lock_guard build_lock(*key_lock);
    {
        std::lock_guard lock(mutex_);
        if (auto it = built_.find(key); it != built_.end()) return it->second;
    }

    auto env = std::make_shared<Environment>();
    env->key = key;
    env->root = cache_root_ / ("env-" + key);
    env->python = python_;
    env->requirements = canonical;
    const auto ready = env->root / "ready.json";
    if (!canonical.empty()) {
        env->site_dir = env->root / "site";
        if (!std::filesystem::exists(ready)) {
            std::filesystem::remove_all(env->root);
            std::filesystem::create_directories(env->site_dir);
            if (!installer_) throw EnvironmentError("no package installer configured", text::join(canonical, "\n"));
            installer_->install(resolved, env->site_dir, python_);
            write_text(ready, json{{"python", python_.string()}, {"requirements", canonical}}.dump(2) + "\n");
            std::lock_guard lock(mutex_);
            ++installs_;
        }
    } else {
        std::filesystem::create_directories(env->root);
    }
    std::lock_guard lock(mutex_);
    built_[key] = env;
    return env;
}

}  // namespace codebench::executor
