#include "codebench/analysis/metrics.hpp"

#include "codebench/python/tokenizer.hpp"

#include <sstream>

namespace codebench::analysis {

namespace {

constexpr const char* kStdlibList =
#include "stdlib_modules.inc"
    ;

using python::SyntaxNode;
using python::SyntaxTree;

void collect_target_names(const SyntaxTree& tree, const SyntaxNode& n, std::set<std::string>& out)
{
    if (n.is("identifier")) {
        out.emplace(tree.text(n));
        return;
    }
    if (n.is("pattern_list") || n.is("tuple_pattern") || n.is("list_pattern") || n.is("list_splat_pattern") ||
        n.is("dictionary_splat_pattern") || n.is("tuple") || n.is("list") || n.is("parenthesized_expression")) {
        for (const auto& c : n.children) collect_target_names(tree, *c, out);
    }
}

void collect_parameter(const SyntaxTree& tree, const SyntaxNode& p, std::set<std::string>& out)
{
    if (p.is("default_parameter") || p.is("typed_parameter") || p.is("typed_default_parameter")) {
        collect_target_names(tree, *p.children.front(), out);
    } else {
        collect_target_names(tree, p, out);
    }
}

// The child following the anonymous keyword `kw`.
const SyntaxNode* after_keyword(const SyntaxNode& n, std::string_view kw)
{
    for (std::size_t i = 0; i + 1 < n.children.size(); ++i) {
        if (!n.children[i]->named && n.children[i]->kind == kw) return n.children[i + 1].get();
    }
    return nullptr;
}

std::string first_component(std::string_view dotted)
{
    return std::string(dotted.substr(0, dotted.find('.')));
}

}  // namespace

std::set<std::string> bound_variables(const SyntaxTree& tree, TextSpan span)
{
    std::set<std::string> names;
    if (span.empty()) return names;
    python::walk(tree.root(), [&](const SyntaxNode& n) {
        if (n.end <= span.begin || n.begin >= span.end) return false;
        if (!span.contains(n)) return true;
        if (n.is("parameters") || n.is("lambda_parameters")) {
            for (const auto& p : n.children) collect_parameter(tree, *p, names);
        } else if (n.is("assignment") || n.is("augmented_assignment")) {
            collect_target_names(tree, *n.children.front(), names);
        } else if (n.is("named_expression")) {
            collect_target_names(tree, *n.children.front(), names);
        } else if (n.is("for_statement") || n.is("for_in_clause")) {
            if (const auto* t = after_keyword(n, "for")) collect_target_names(tree, *t, names);
        } else if (n.is("with_item")) {
            const auto& item = *n.children.front();
            if (item.is("as_pattern")) {
                if (const auto* target = item.child_of_kind("as_pattern_target")) {
                    collect_target_names(tree, *target->children.front(), names);
                }
            }
        }
        return true;
    });
    return names;
}

std::set<std::string> imported_modules(const SyntaxTree& tree)
{
    std::set<std::string> modules;
    python::walk(tree.root(), [&](const SyntaxNode& n) {
        if (n.is("import_statement")) {
            for (const auto& c : n.children) {
                const SyntaxNode* name = c.get();
                if (name->is("aliased_import")) name = name->children.front().get();
                if (name->is("dotted_name")) modules.insert(first_component(tree.text(*name)));
            }
            return false;
        }
        if (n.is("import_from_statement")) {
            const auto& source = *n.children[1];
            if (source.is("dotted_name")) modules.insert(first_component(tree.text(source)));
            return false;
        }
        if (n.is("future_import_statement")) {
            modules.insert("__future__");
            return false;
        }
        return true;
    });
    return modules;
}

std::optional<TextSpan> function_span(const SyntaxTree& tree, std::string_view name)
{
    std::optional<TextSpan> found;
    python::walk(tree.root(), [&](const SyntaxNode& n) {
        if (found) return false;
        if (n.is("function_definition")) {
            const auto* id = n.child_of_kind("identifier");
            if (id && tree.text(*id) == name) {
                found = TextSpan{n.begin, n.end};
                return false;
            }
        }
        return true;
    });
    return found;
}

CodeMetrics compute_metrics(std::string_view code, std::optional<TextSpan> target)
{
    auto tree = python::parse_module(std::string(code));
    CodeMetrics m;
    m.code_tokens = python::count_code_tokens(code);
    m.ast_depth = tree.depth();
    TextSpan span = target.value_or(TextSpan{0, code.size()});
    m.variables = bound_variables(tree, span);
    if (!span.empty()) {
        python::walk(tree.root(), [&](const SyntaxNode& n) {
            if (n.end <= span.begin || n.begin >= span.end) return false;
            if (n.is("call") && span.contains(n)) ++m.function_calls_in_target;
            return true;
        });
    }
    for (const auto& mod : imported_modules(tree)) {
        if (is_stdlib_module(mod)) {
            m.stdlib_imports.insert(mod);
        } else {
            m.external_imports.insert(mod);
        }
    }
    return m;
}

const std::set<std::string, std::less<>>& stdlib_modules()
{
    static const std::set<std::string, std::less<>> modules = [] {
        std::set<std::string, std::less<>> s;
        std::istringstream in(kStdlibList);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            s.insert(line);
        }
        return s;
    }();
    return modules;
}

bool is_stdlib_module(std::string_view top_level_name)
{
    return stdlib_modules().count(top_level_name) > 0;
}

}  // namespace codebench::analysis
