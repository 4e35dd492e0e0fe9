#include "codebench/eval/prompt.hpp"

#include "codebench/pipeline/slots.hpp"
#include "codebench/util/text.hpp"

#include <algorithm>

namespace codebench::eval {

namespace {

std::string escape_docstring(std::string s)
{
    s = text::replace_all(std::move(s), "\\", "\\\\");
    return text::replace_all(std::move(s), "\"\"\"", "\\\"\\\"\\\"");
}

// First line after `label`, continuation lines indented one level deeper.
std::string field(const std::string& label, const std::string& value, const std::string& indent)
{
    auto lines = text::split_lines(escape_docstring(value));
    while (!lines.empty() && text::is_blank(lines.back())) lines.pop_back();
    std::string out = indent + label + ": " + (lines.empty() ? std::string{} : std::string(text::trim(lines[0]))) + "\n";
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (text::is_blank(lines[i])) continue;
        out += indent + "    " + std::string(text::trim(lines[i])) + "\n";
    }
    return out;
}

bool all_space(std::string_view s)
{
    return std::all_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

}  // namespace

std::string render_stub(const pipeline::EvalExample& ex, const std::string& indent)
{
    std::string body_indent = indent + "    ";
    std::string out = text::indent(ex.function_header, indent) + "\n";
    out += body_indent + "\"\"\"\n";
    if (ex.instruction_degraded()) {
        std::string doc = ex.metadata.value("original_docstring", std::string{});
        for (const auto& line : text::split_lines(escape_docstring(doc))) {
            out += text::is_blank(line) ? std::string("\n") : body_indent + line + "\n";
        }
    } else {
        out += field("Functionality", ex.instruction.functionality, body_indent);
        out += field("Inputs", ex.instruction.inputs, body_indent);
        out += field("Outputs", ex.instruction.outputs, body_indent);
    }
    out += body_indent + "\"\"\"\n\n";
    out += body_indent + "...\n";
    return out;
}

std::string build_prompt(const pipeline::EvalExample& ex)
{
    std::string indent = pipeline::slot_indent(ex.context);
    std::string code = text::with_final_newline(pipeline::replace_slot(ex.context, render_stub(ex, indent)));
    return "Complete the " + ex.qualified_name() + " function in the code below based on the docstring.\n"
           "Output one complete piece of code. Your code should start with a ```python delimiter and end with a ``` "
           "delimiter.\n\n```python\n" +
           code + "```\n";
}

TestLeakGuard::TestLeakGuard(const pipeline::EvalExample& example, std::size_t window)
    : TestLeakGuard(example.test_codes(), build_prompt(example), window)
{
}

TestLeakGuard::TestLeakGuard(const std::vector<std::string>& secrets, std::string_view public_text, std::size_t window)
    : window_(window), storage_(secrets)
{
    std::unordered_set<std::string_view> visible;
    for (std::size_t i = 0; i + window_ <= public_text.size(); ++i) visible.insert(public_text.substr(i, window_));
    for (const auto& s : storage_) {
        std::string_view sv(s);
        for (std::size_t i = 0; i + window_ <= sv.size(); ++i) {
            auto w = sv.substr(i, window_);
            if (all_space(w) || visible.count(w)) continue;
            fragments_.insert(w);
        }
    }
}

bool TestLeakGuard::leaks(std::string_view text) const
{
    for (std::size_t i = 0; i + window_ <= text.size(); ++i) {
        if (fragments_.count(text.substr(i, window_))) return true;
    }
    return false;
}

std::string TestLeakGuard::redact(std::string_view text) const
{
    std::vector<char> hit(text.size(), 0);
    bool any = false;
    for (std::size_t i = 0; i + window_ <= text.size(); ++i) {
        if (fragments_.count(text.substr(i, window_))) {
            std::fill(hit.begin() + i, hit.begin() + i + window_, 1);
            any = true;
        }
    }
    if (!any) return std::string(text);
    std::string out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        bool touched = std::any_of(hit.begin() + pos, hit.begin() + end, [](char c) { return c; });
        if (touched) {
            out += std::string(text::leading_whitespace(text.substr(pos, end - pos)));
            out += redacted_line;
        } else {
            out += text.substr(pos, end - pos);
        }
        if (nl != std::string_view::npos) out += '\n';
        pos = end + 1;
    }
    return out;
}

}  // namespace codebench::eval
