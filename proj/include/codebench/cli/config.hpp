#pragma once

#include "codebench/llm/gateway.hpp"
#include "codebench/util/jsonl.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace codebench::cli {

struct SamplingConfig {
    double temperature = 0.3;
    double top_p = 0.95;
    std::size_t n = 1;
};

/// Everything a subcommand needs, loaded from one JSON file and then overridden by flags.
/// Relative paths are resolved against the config file's directory (the working directory
/// when no file is given).
struct RunConfig {
    std::filesystem::path base_dir = ".";
    std::optional<std::filesystem::path> corpus;
    std::filesystem::path output_dir = "out";
    std::optional<std::size_t> limit;

    // stage -> model alias; stages: sandbox, tests, debug, instruction, augment, eval
    std::map<std::string, std::string> models;
    std::map<std::string, llm::ProviderConfig> providers;
    llm::ReplayMode replay_mode = llm::ReplayMode::live;
    std::optional<std::filesystem::path> transcript;
    std::size_t max_in_flight = 8;

    std::size_t regenerations = 3;
    std::size_t debug_iterations = 3;
    std::size_t augment_k = 5;
    std::map<std::string, SamplingConfig> sampling;  // per pipeline stage

    double pipeline_timeout_s = 30.0;
    double evaluation_timeout_s = 10.0;
    std::optional<std::filesystem::path> banned_keywords;
    std::optional<std::filesystem::path> io_keywords;

    std::size_t n_samples = 20;
    double eval_temperature = 0.3;
    double eval_top_p = 0.95;
    std::vector<std::size_t> k_list = {1, 2, 5, 10};
    std::size_t rounds = 0;
    std::size_t stderr_lines = 20;

    std::vector<std::string> shim_command;
    std::optional<std::filesystem::path> scratch_dir;
    std::string python = "python3";
    std::optional<std::filesystem::path> env_cache;
    std::vector<std::string> pip_args;

    std::string study_host = "127.0.0.1";
    int study_port = 8080;
    std::optional<std::filesystem::path> static_dir;
    std::size_t snapshot_every = 20;

    std::size_t jobs = 1;

    [[nodiscard]] std::filesystem::path resolve(const std::filesystem::path& p) const;
    [[nodiscard]] std::filesystem::path output(const std::string& name) const;
    /// Model alias for a stage, falling back to models["default"]. Throws ConfigError when unset.
    [[nodiscard]] std::string model_for(const std::string& stage) const;
    /// Range and cross-field checks. Throws ConfigError.
    void validate() const;
};

inline const std::vector<std::string> pipeline_stages = {"sandbox", "tests", "debug", "instruction", "augment"};

/// Parses a config document. Unknown keys and wrong types throw ConfigError.
RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir);
/// Reads and parses a config file. Throws ConfigError when missing or malformed.
RunConfig load_run_config(const std::filesystem::path& path);

/// Throws ConfigError when the path does not exist.
void require_exists(const std::filesystem::path& p, const std::string& what);

}  // namespace codebench::cli
