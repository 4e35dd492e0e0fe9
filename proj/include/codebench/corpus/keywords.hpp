#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace codebench::corpus {

/// Post-filter list of destructive or stateful operations (36 entries, substring-matched).
const std::vector<std::string>& banned_keywords();

/// Default ingest-time I/O filter: the file-system subset of the banned list.
const std::vector<std::string>& default_io_keywords();

/// One keyword per line; blank lines and lines starting with "# " are ignored. Keywords are kept
/// verbatim (no trimming of inner spaces), only the line terminator is stripped.
std::vector<std::string> load_keyword_file(const std::filesystem::path& path);

struct KeywordHit {
    std::string keyword;
    std::size_t position;
};

/// Earliest occurrence of any keyword in text; ties go to the longer keyword, then the
/// lexicographically smaller one, so the answer does not depend on list order.
std::optional<KeywordHit> first_keyword_hit(std::string_view text, const std::vector<std::string>& keywords);

}  // namespace codebench::corpus
