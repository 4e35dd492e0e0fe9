#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace codebench::text {

std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string_view trim(std::string_view s);
std::string_view trim_right(std::string_view s);

/// Leading whitespace of a line, verbatim.
std::string_view leading_whitespace(std::string_view line);

bool is_blank(std::string_view line);

/// Removes the longest common leading whitespace from every non-blank line.
std::string dedent(std::string_view s);

/// Prefixes every non-blank line with `prefix`.
std::string indent(std::string_view s, std::string_view prefix);

std::string replace_all(std::string s, std::string_view from, std::string_view to);

/// Last `n` lines of `s` (all of it when it has fewer).
std::string tail_lines(std::string_view s, std::size_t n);

/// Ensures `s` ends with exactly one newline unless empty.
std::string with_final_newline(std::string s);

}  // namespace codebench::text
