#include "codebench/pipeline/slots.hpp"

#include "codebench/python/syntax_tree.hpp"
#include "codebench/python/tokenizer.hpp"
#include "codebench/util/text.hpp"

#include <stdexcept>
#include <vector>

namespace codebench::pipeline {

namespace {

using python::SyntaxNode;

struct Found {
    const SyntaxNode* def = nullptr;
    std::vector<std::string> classes;
};

bool find_def(const python::SyntaxTree& tree, const SyntaxNode& node, std::string_view name,
              std::vector<std::string>& classes, Found& out)
{
    if (node.is("function_definition")) {
        const auto* id = node.child_of_kind("identifier");
        if (id && tree.text(*id) == name) {
            out.def = &node;
            out.classes = classes;
            return true;
        }
    }
    bool is_class = node.is("class_definition");
    if (is_class) {
        const auto* id = node.child_of_kind("identifier");
        classes.emplace_back(id ? std::string(tree.text(*id)) : std::string{});
    }
    for (const auto& child : node.children) {
        if (find_def(tree, *child, name, classes, out)) return true;
    }
    if (is_class) classes.pop_back();
    return false;
}

// Removes `prefix` from every line that starts with it; other lines are kept verbatim.
std::string strip_prefix_lines(std::string_view s, std::string_view prefix)
{
    if (prefix.empty()) return std::string(s);
    std::string out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        std::size_t nl = s.find('\n', pos);
        std::size_t end = nl == std::string_view::npos ? s.size() : nl + 1;
        std::string_view line = s.substr(pos, end - pos);
        if (line.substr(0, prefix.size()) == prefix) line.remove_prefix(prefix.size());
        out += line;
        pos = end;
    }
    return out;
}

struct MarkerRegion {
    std::size_t begin;  // start of the begin-marker line
    std::size_t end;    // one past the end-marker line (including its newline)
    std::string indent;
};

MarkerRegion find_markers(const std::string& context)
{
    std::size_t pos = 0;
    std::optional<MarkerRegion> region;
    while (pos < context.size()) {
        std::size_t nl = context.find('\n', pos);
        std::size_t end = nl == std::string::npos ? context.size() : nl + 1;
        std::string_view line(context.data() + pos, end - pos);
        std::string_view content = text::trim(line);
        if (!region && content == slot_begin_marker) {
            region = MarkerRegion{pos, end, std::string(text::leading_whitespace(line))};
        } else if (region && content == slot_end_marker) {
            region->end = end;
            return *region;
        }
        pos = end;
    }
    throw std::invalid_argument("context has no target slot markers");
}

}  // namespace

std::optional<SlotSplit> split_target(const std::string& program, const std::string& function_name)
{
    auto tree = python::parse_module(program);
    Found found;
    std::vector<std::string> classes;
    find_def(tree, tree.root(), function_name, classes, found);
    if (!found.def) return std::nullopt;
    const SyntaxNode& def = *found.def;

    std::size_t line_start = def.begin == 0 ? 0 : program.rfind('\n', def.begin - 1);
    line_start = line_start == std::string::npos || def.begin == 0 ? 0 : line_start + 1;
    std::string indent = program.substr(line_start, def.begin - line_start);
    if (!text::is_blank(indent) && !indent.empty()) return std::nullopt;
    std::size_t nl = program.find('\n', def.end == 0 ? 0 : def.end - 1);
    std::size_t line_end = nl == std::string::npos ? program.size() : nl + 1;

    std::size_t header_end = def.end;
    for (const auto& child : def.children) {
        if (!child->named && child->kind == ":") {
            header_end = child->end;
            break;
        }
    }

    SlotSplit split;
    split.target = text::with_final_newline(
        strip_prefix_lines(std::string_view(program).substr(line_start, line_end - line_start), indent));
    split.header = strip_prefix_lines(std::string_view(program).substr(def.begin, header_end - def.begin), indent);
    split.context = program.substr(0, line_start) + indent + std::string(slot_begin_marker) + "\n" + indent +
                    std::string(slot_end_marker) + "\n" + program.substr(line_end);
    for (const auto& c : found.classes) split.qualified_name += c + ".";
    split.qualified_name += function_name;
    return split;
}

std::string replace_slot(const std::string& context, const std::string& replacement)
{
    auto region = find_markers(context);
    return context.substr(0, region.begin) + replacement + context.substr(region.end);
}

std::string slot_indent(const std::string& context)
{
    return find_markers(context).indent;
}

std::string assemble(const std::string& context, const std::string& function_code)
{
    auto region = find_markers(context);
    std::string body = text::with_final_newline(text::indent(function_code, region.indent));
    return context.substr(0, region.begin) + body + context.substr(region.end);
}

std::string normalize_completion(const std::string& completion, const std::string& function_name,
                                 const std::string& header)
{
    std::string code = text::dedent(completion);
    try {
        if (auto split = split_target(code, function_name)) return split->target;
    } catch (const python::SyntaxError&) {
        // fall through: not a complete module, treat it as a body
    }
    std::string body = code;
    while (!body.empty() && (body.back() == '\n' || body.back() == ' ' || body.back() == '\t')) body.pop_back();
    if (text::is_blank(body)) return text::with_final_newline(header);
    return text::with_final_newline(header + "\n" + text::indent(body, "    "));
}

bool same_code(const std::string& a, const std::string& b)
{
    try {
        return python::code_token_texts(a) == python::code_token_texts(b);
    } catch (const python::SyntaxError&) {
        return false;
    }
}

}  // namespace codebench::pipeline
