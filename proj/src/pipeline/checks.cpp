#include "codebench/pipeline/checks.hpp"

#include "codebench/analysis/metrics.hpp"
#include "codebench/analysis/similarity.hpp"
#include "codebench/executor/environment.hpp"
#include "codebench/llm/chat.hpp"
#include "codebench/python/syntax_tree.hpp"
#include "codebench/python/tokenizer.hpp"
#include "codebench/util/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <set>

namespace codebench::pipeline {

namespace {

using python::SyntaxNode;
using python::SyntaxTree;

std::string lower(std::string s)
{
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Name a call expression refers to: `f(...)` -> f, `a.b.f(...)` -> f.
std::string callee_name(const SyntaxTree& tree, const SyntaxNode& call)
{
    if (call.children.empty()) return {};
    const SyntaxNode& fn = *call.children.front();
    if (fn.is("identifier")) return std::string(tree.text(fn));
    if (fn.is("attribute")) {
        for (auto it = fn.children.rbegin(); it != fn.children.rend(); ++it) {
            if ((*it)->is("identifier")) return std::string(tree.text(**it));
        }
    }
    return {};
}

// Names referenced by calls in `node`'s subtree: callees and bare identifiers passed as arguments.
void collect_references(const SyntaxTree& tree, const SyntaxNode& node, std::set<std::string>& out)
{
    python::walk(node, [&](const SyntaxNode& n) {
        if (n.is("call")) {
            if (auto name = callee_name(tree, n); !name.empty()) out.insert(name);
            if (const auto* args = n.child_of_kind("argument_list")) {
                for (const auto& a : args->children) {
                    if (a->is("identifier")) out.insert(std::string(tree.text(*a)));
                    if (a->is("keyword_argument")) {
                        const auto& v = *a->children.back();
                        if (v.is("identifier")) out.insert(std::string(tree.text(v)));
                    }
                }
            }
        }
        return true;
    });
}

struct Scopes {
    std::map<std::string, std::set<std::string>> functions;  // name -> referenced names
    std::set<std::string> module_level;
    bool redefines = false;
};

void scan_scopes(const SyntaxTree& tree, const SyntaxNode& node, const std::string& target, Scopes& s)
{
    for (const auto& child : node.children) {
        const SyntaxNode* def = child.get();
        if (def->is("decorated_definition")) {
            if (const auto* inner = def->child_of_kind("function_definition")) def = inner;
        }
        if (def->is("function_definition")) {
            const auto* id = def->child_of_kind("identifier");
            std::string name = id ? std::string(tree.text(*id)) : std::string{};
            if (name == target && &node == &tree.root()) s.redefines = true;
            collect_references(tree, *def, s.functions[name]);
            continue;
        }
        if (def->is("class_definition")) {
            if (const auto* body = def->child_of_kind("block")) scan_scopes(tree, *body, target, s);
            continue;
        }
        collect_references(tree, *child, s.module_level);
    }
}

}  // namespace

double target_similarity(const std::string& target_def, const std::string& header, const std::string& reference_body)
{
    std::string body = target_def.size() > header.size() ? target_def.substr(header.size()) : std::string{};
    try {
        auto ref = python::code_token_texts(text::dedent(reference_body));
        if (ref.empty()) return 0.0;
        return analysis::bleu(python::code_token_texts(text::dedent(body)), ref);
    } catch (const python::SyntaxError&) {
        return 0.0;
    }
}

SandboxVerdict validate_sandbox(const std::string& candidate, const corpus::SourceFragment& frag,
                                const ValidationConfig& config)
{
    SandboxVerdict v;
    std::optional<SlotSplit> split;
    try {
        split = split_target(candidate, frag.function_name);
    } catch (const python::SyntaxError&) {
        v.reason = "unparsable";
        return v;
    }
    if (!split) {
        v.reason = "target_missing";
        return v;
    }
    if (!same_code(assemble(split->context, split->target), candidate)) {
        v.reason = "target_not_spliceable";
        return v;
    }
    v.similarity = target_similarity(split->target, split->header, frag.body);
    v.context_tokens = python::count_code_tokens(split->context);
    v.split = std::move(split);
    if (v.similarity < config.min_target_bleu) {
        v.reason = "target_dissimilar";
        return v;
    }
    if (v.context_tokens < config.min_context_tokens) {
        v.reason = "context_too_short";
        return v;
    }
    v.accepted = true;
    return v;
}

TestCheck check_test_set(const std::string& tests, const std::string& function_name)
{
    TestCheck c;
    std::optional<SyntaxTree> tree;
    try {
        tree.emplace(python::parse_module(tests));
    } catch (const python::SyntaxError&) {
        c.reason = "tests_unparsable";
        return c;
    }
    python::walk(tree->root(), [&](const SyntaxNode& n) {
        if (n.is("assert_statement")) ++c.asserts;
        return true;
    });
    if (c.asserts < min_asserts) {
        c.reason = "too_few_asserts";
        return c;
    }
    Scopes scopes;
    scan_scopes(*tree, tree->root(), function_name, scopes);
    if (scopes.redefines) {
        c.reason = "target_redefined";
        return c;
    }
    std::set<std::string> reached;
    std::vector<std::string> pending(scopes.module_level.begin(), scopes.module_level.end());
    for (const auto& [name, refs] : scopes.functions) {
        if (name.rfind("test", 0) == 0) pending.push_back(name);
    }
    while (!pending.empty()) {
        std::string name = std::move(pending.back());
        pending.pop_back();
        if (!reached.insert(name).second) continue;
        if (name == function_name) {
            c.ok = true;
            return c;
        }
        if (auto it = scopes.functions.find(name); it != scopes.functions.end()) {
            pending.insert(pending.end(), it->second.begin(), it->second.end());
        }
    }
    c.reason = "target_not_called";
    return c;
}

std::string distribution_for_module(const std::string& module)
{
    static const std::map<std::string, std::string> aliases = {
        {"sklearn", "scikit-learn"},  {"cv2", "opencv-python"},    {"PIL", "Pillow"},
        {"yaml", "PyYAML"},           {"bs4", "beautifulsoup4"},   {"skimage", "scikit-image"},
        {"dateutil", "python-dateutil"}, {"attr", "attrs"},        {"Crypto", "pycryptodome"},
        {"jwt", "PyJWT"},             {"dotenv", "python-dotenv"}, {"serial", "pyserial"},
        {"docx", "python-docx"},      {"OpenSSL", "pyOpenSSL"},    {"MySQLdb", "mysqlclient"},
    };
    auto it = aliases.find(module);
    return it == aliases.end() ? module : it->second;
}

std::vector<std::string> derive_dependencies(const std::string& program)
{
    auto tree = python::parse_module(program);
    std::vector<std::vector<std::string>> lists;
    static const std::regex pin_line(R"(^[ \t]*#[ \t]*requires:[ \t]*(.+)$)", std::regex::icase);
    for (const auto& line : text::split_lines(program)) {
        std::smatch m;
        if (!std::regex_match(line, m, pin_line)) continue;
        std::string rest = m[1];
        std::size_t pos = 0;
        while (pos <= rest.size()) {
            std::size_t comma = rest.find(',', pos);
            if (comma == std::string::npos) comma = rest.size();
            std::string item(text::trim(std::string_view(rest).substr(pos, comma - pos)));
            pos = comma + 1;
            if (item.empty()) continue;
            try {
                lists.push_back({executor::parse_requirement(item).str()});
            } catch (const std::invalid_argument&) {
                // malformed pin comments are ignored
            }
        }
    }
    for (const auto& module : analysis::imported_modules(tree)) {
        if (analysis::is_stdlib_module(module)) continue;
        lists.push_back({executor::normalize_package_name(distribution_for_module(module))});
    }
    auto merged = executor::merge_requirements(lists).requirements;
    std::sort(merged.begin(), merged.end());
    return merged;
}

Instruction parse_instruction(const std::string& text)
{
    static const std::regex label(R"(^[\s>*#-]*\**\s*(functionality|inputs?|outputs?)\s*\**\s*:\s*\**\s*(.*)$)",
                                  std::regex::icase);
    Instruction ins;
    std::string* current = nullptr;
    for (const auto& raw : text::split_lines(llm::extract_code_block(text))) {
        std::smatch m;
        if (std::regex_match(raw, m, label)) {
            std::string key = lower(m[1]);
            current = key == "functionality" ? &ins.functionality : key[0] == 'i' ? &ins.inputs : &ins.outputs;
            current->clear();
            *current = std::string(text::trim(std::string(m[2])));
            continue;
        }
        if (!current) continue;
        std::string_view line = text::trim(raw);
        if (line.empty()) continue;
        if (!current->empty()) *current += ' ';
        *current += line;
    }
    return ins;
}

Instruction fallback_instruction(const std::string& docstring, const std::string& function_name)
{
    Instruction ins;
    std::string doc(text::trim(docstring));
    ins.functionality = doc.empty() ? "Implements " + function_name + "." : doc;
    ins.inputs = "The parameters in the function signature.";
    ins.outputs = "The value returned by the function.";
    return ins;
}

std::string function_docstring(const std::string& function_code)
{
    std::optional<SyntaxTree> tree;
    try {
        tree.emplace(python::parse_module(function_code));
    } catch (const python::SyntaxError&) {
        return {};
    }
    const SyntaxNode* def = nullptr;
    python::walk(tree->root(), [&](const SyntaxNode& n) {
        if (!def && n.is("function_definition")) def = &n;
        return def == nullptr;
    });
    if (!def) return {};
    const auto* block = def->child_of_kind("block");
    if (!block || block->children.empty()) return {};
    const SyntaxNode& first = *block->children.front();
    if (!first.is("expression_statement") || first.children.empty() || !first.children.front()->is("string"))
        return {};
    std::string literal(tree->text(*first.children.front()));
    std::size_t q = literal.find_first_of("\"'");
    if (q == std::string::npos) return {};
    std::string prefix = lower(literal.substr(0, q));
    if (prefix.find('f') != std::string::npos || prefix.find('b') != std::string::npos) return {};
    std::size_t quote_len = literal.compare(q, 3, "\"\"\"") == 0 || literal.compare(q, 3, "'''") == 0 ? 3 : 1;
    if (literal.size() < q + 2 * quote_len) return {};
    std::string body = literal.substr(q + quote_len, literal.size() - q - 2 * quote_len);
    auto lines = text::split_lines(body);
    if (lines.empty()) return {};
    std::string first_line(text::trim(lines.front()));
    lines.erase(lines.begin());
    std::string rest = text::dedent(text::join(lines, "\n"));
    std::string out = first_line;
    if (!text::is_blank(rest)) out += (out.empty() ? "" : "\n") + rest;
    return std::string(text::trim(out));
}

}  // namespace codebench::pipeline
