#pragma once

#include "codebench/util/jsonl.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace codebench::corpus {

struct SourceFragment {
    std::string id;
    std::string repo;
    std::string path;
    std::string function_name;
    std::string signature;
    std::string docstring;
    std::string body;
    std::string file_context;
    std::optional<std::string> license;
};

std::string stable_id(const std::string& repo, const std::string& path, const std::string& function_name);

json to_json(const SourceFragment& f);
/// Throws std::invalid_argument naming the offending field.
SourceFragment fragment_from_json(const json& j);

struct LoadResult {
    std::vector<SourceFragment> fragments;
    std::size_t skipped = 0;
    std::vector<std::string> warnings;  // one per skipped record, with its line number
};

/// Streams records in file order, stopping once `limit` fragments were accepted. Malformed
/// records are skipped and tallied. Throws std::runtime_error when the file cannot be read.
LoadResult load_fragments(const std::filesystem::path& path, std::optional<std::size_t> limit = std::nullopt);

struct PrefilterDecision {
    bool keep = true;
    std::string reason;  // matched keyword or "missing_context"; empty when kept
};

/// Throws std::invalid_argument when keywords is empty.
PrefilterDecision prefilter(const SourceFragment& frag, const std::vector<std::string>& io_keywords);

}  // namespace codebench::corpus
