#pragma once

#include "codebench/python/syntax_tree.hpp"

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace codebench::analysis {

/// Half-open byte range within a source text.
struct TextSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    [[nodiscard]] bool empty() const { return begin >= end; }
    [[nodiscard]] bool contains(const python::SyntaxNode& n) const { return n.begin >= begin && n.end <= end; }
};

struct CodeMetrics {
    std::size_t code_tokens = 0;
    std::size_t ast_depth = 0;
    std::set<std::string> variables;
    std::set<std::string> stdlib_imports;
    std::set<std::string> external_imports;
    std::size_t function_calls_in_target = 0;
};

/// Metrics over `code`. Variables and call counts are restricted to `target` (the whole
/// source when absent). Throws python::SyntaxError when the code does not parse.
CodeMetrics compute_metrics(std::string_view code, std::optional<TextSpan> target = std::nullopt);

/// Identifiers bound inside `span`: parameters, assignment and augmented-assignment targets,
/// walrus targets, and loop, `with` and comprehension targets.
std::set<std::string> bound_variables(const python::SyntaxTree& tree, TextSpan span);

/// Top-level module names imported anywhere in the tree (relative imports excluded).
std::set<std::string> imported_modules(const python::SyntaxTree& tree);

/// Span of the first `def` named `name` (decorators excluded), if any.
std::optional<TextSpan> function_span(const python::SyntaxTree& tree, std::string_view name);

/// Membership in the bundled standard-module list.
bool is_stdlib_module(std::string_view top_level_name);
const std::set<std::string, std::less<>>& stdlib_modules();

}  // namespace codebench::analysis
