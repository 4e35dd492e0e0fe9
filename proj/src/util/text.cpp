#include "codebench/util/text.hpp"

#include <algorithm>

namespace codebench::text {

std::vector<std::string> split_lines(std::string_view s)
{
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start < s.size()) {
        std::size_t nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(s.substr(start));
            break;
        }
        lines.emplace_back(s.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string_view trim_right(std::string_view s)
{
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
        s.remove_suffix(1);
    }
    return s;
}

std::string_view trim(std::string_view s)
{
    s = trim_right(s);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) {
        s.remove_prefix(1);
    }
    return s;
}

std::string_view leading_whitespace(std::string_view line)
{
    std::size_t i = 0;
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    return line.substr(0, i);
}

bool is_blank(std::string_view line)
{
    return trim(line).empty();
}

std::string dedent(std::string_view s)
{
    auto lines = split_lines(s);
    std::string_view common;
    bool first = true;
    for (const auto& l : lines) {
        if (is_blank(l)) continue;
        auto ws = leading_whitespace(l);
        if (first) {
            common = ws;
            first = false;
            continue;
        }
        std::size_t k = 0;
        while (k < common.size() && k < ws.size() && common[k] == ws[k]) ++k;
        common = common.substr(0, k);
    }
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view l = lines[i];
        if (is_blank(l)) {
            l = {};
        } else {
            l.remove_prefix(common.size());
        }
        out += l;
        if (i + 1 < lines.size() || (!s.empty() && s.back() == '\n')) out += '\n';
    }
    return out;
}

std::string indent(std::string_view s, std::string_view prefix)
{
    auto lines = split_lines(s);
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (!is_blank(lines[i])) {
            out += prefix;
            out += lines[i];
        }
        if (i + 1 < lines.size() || (!s.empty() && s.back() == '\n')) out += '\n';
    }
    return out;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to)
{
    if (from.empty()) return s;
    std::size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::string tail_lines(std::string_view s, std::size_t n)
{
    auto lines = split_lines(s);
    if (lines.size() <= n) return std::string(s);
    std::vector<std::string> last(lines.end() - static_cast<std::ptrdiff_t>(n), lines.end());
    return join(last, "\n") + (s.back() == '\n' ? "\n" : "");
}

std::string with_final_newline(std::string s)
{
    while (s.size() >= 2 && s[s.size() - 1] == '\n' && s[s.size() - 2] == '\n') s.pop_back();
    if (!s.empty() && s.back() != '\n') s += '\n';
    return s;
}

}  // namespace codebench::text
