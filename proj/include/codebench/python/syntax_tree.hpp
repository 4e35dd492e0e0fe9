#pragma once

#include "codebench/python/tokenizer.hpp"

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace codebench::python {

/// A concrete syntax tree node. Named nodes carry a grammar kind such as `function_definition`;
/// anonymous nodes are punctuation and keywords whose kind is their spelling.
struct SyntaxNode {
    std::string kind;
    bool named = true;
    std::size_t begin = 0;
    std::size_t end = 0;
    SourceLocation location;
    std::vector<std::unique_ptr<SyntaxNode>> children;

    [[nodiscard]] bool is(std::string_view k) const { return kind == k; }
    [[nodiscard]] std::size_t depth() const;
    [[nodiscard]] const SyntaxNode* child_of_kind(std::string_view k) const;
};

/// Owns the parsed source together with its tree so that node offsets stay valid.
class SyntaxTree {
public:
    SyntaxTree(std::string source, std::unique_ptr<SyntaxNode> root);

    [[nodiscard]] const SyntaxNode& root() const { return *root_; }
    [[nodiscard]] const std::string& source() const { return source_; }
    [[nodiscard]] std::string_view text(const SyntaxNode& node) const;

    /// Maximum node depth; the root counts as depth 1.
    [[nodiscard]] std::size_t depth() const { return root_->depth(); }

    /// S-expression dump listing every node, anonymous ones quoted.
    [[nodiscard]] std::string dump() const;

private:
    std::string source_;
    std::unique_ptr<SyntaxNode> root_;
};

/// Pre-order traversal; returning false from the visitor skips the node's children.
void walk(const SyntaxNode& node, const std::function<bool(const SyntaxNode&)>& visit);

/// Parses a Python 3 module. Throws SyntaxError carrying the offending location.
SyntaxTree parse_module(std::string source);

/// True when `source` parses as a module.
bool parses(std::string_view source);

}  // namespace codebench::python
