#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace codebench::pipeline {

/// Prompt templates with `{{name}}` placeholders, one file per stage.
class TemplateSet {
public:
    static constexpr const char* stages[] = {"sandbox", "tests", "debug", "instruction", "augment"};

    /// Reads <dir>/<stage>.txt for every stage. Throws ConfigError when one is missing.
    static TemplateSet load(const std::filesystem::path& dir);
    /// The templates shipped under data/templates.
    static const TemplateSet& builtin();

    void set(const std::string& stage, std::string text);

    /// Substitutes every placeholder. Throws std::invalid_argument for an unknown stage or a
    /// placeholder without a value.
    [[nodiscard]] std::string render(const std::string& stage, const std::map<std::string, std::string>& vars) const;

private:
    std::map<std::string, std::string> templates_;
};

std::filesystem::path default_data_dir();

}  // namespace codebench::pipeline
