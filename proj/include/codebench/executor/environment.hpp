#pragma once

#include "codebench/util/errors.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace codebench::executor {

struct Requirement {
    std::string name;       // normalized: lowercase, runs of -_. collapsed to '-'
    std::string extras;     // "[a,b]" or empty
    std::string specifier;  // e.g. "==1.2" or ">=1,<2"; empty when unpinned
    std::string marker;     // text after ';' or empty

    [[nodiscard]] std::string str() const;
};

/// Parses `name[extras] spec ; marker`. Throws std::invalid_argument.
Requirement parse_requirement(const std::string& text);
std::string normalize_package_name(const std::string& name);

class EnvironmentError : public InfrastructureError {
public:
    EnvironmentError(const std::string& message, std::string trace)
        : InfrastructureError(message), trace_(std::move(trace))
    {
    }
    [[nodiscard]] const std::string& trace() const { return trace_; }

private:
    std::string trace_;
};

class DependencyConflict : public EnvironmentError {
public:
    using EnvironmentError::EnvironmentError;
};

/// Set-union of requirement lists. Identical entries collapse; a pinned entry supersedes an
/// unpinned one. Two different pins for one package throw DependencyConflict listing both.
std::vector<Requirement> resolve_requirements(const std::vector<std::string>& requirements);

struct MergeResult {
    std::vector<std::string> requirements;
    std::vector<std::string> overridden;  // later pins discarded in favour of an earlier one
};

/// Merges per-example lists for a shared environment: first pin wins, later incompatible pins
/// are reported in `overridden` (examples that depended on them fail re-execution).
MergeResult merge_requirements(const std::vector<std::vector<std::string>>& lists);

struct Environment {
    std::string key;
    std::filesystem::path root;
    std::filesystem::path site_dir;  // empty for a bare interpreter
    std::filesystem::path python;
    std::vector<std::string> requirements;
};

class PackageInstaller {
public:
    virtual ~PackageInstaller() = default;
    /// Installs into target (an empty directory). Throws EnvironmentError with the tool output.
    virtual void install(const std::vector<Requirement>& requirements, const std::filesystem::path& target,
                         const std::filesystem::path& python) = 0;
};

/// `python -m pip install --target <dir> ...`
class PipInstaller : public PackageInstaller {
public:
    explicit PipInstaller(std::vector<std::string> extra_args = {}) : extra_args_(std::move(extra_args)) {}
    void install(const std::vector<Requirement>& requirements, const std::filesystem::path& target,
                 const std::filesystem::path& python) override;

private:
    std::vector<std::string> extra_args_;
};

/// Builds environments keyed by the content hash of (interpreter, resolved requirements).
/// Repeated builds of the same list reuse the cached directory.
class EnvironmentManager {
public:
    EnvironmentManager(std::filesystem::path cache_root, std::shared_ptr<PackageInstaller> installer,
                       const std::string& python = "python3");

    std::shared_ptr<const Environment> build(const std::vector<std::string>& requirements);

    [[nodiscard]] const std::filesystem::path& python() const { return python_; }
    [[nodiscard]] std::size_t installs() const;

private:
    std::filesystem::path cache_root_;
    std::shared_ptr<PackageInstaller> installer_;
    std::filesystem::path python_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> key_locks_;
    std::map<std::string, std::shared_ptr<const Environment>> built_;
    std::size_t installs_ = 0;
};

}  // namespace codebench::executor
