#include "codebench/corpus/corpus.hpp"

#include "codebench/corpus/keywords.hpp"
#include "codebench/python/syntax_tree.hpp"
#include "codebench/util/text.hpp"

#include <fmt/format.h>
#include <fstream>

namespace codebench::corpus {

std::string stable_id(const std::string& repo, const std::string& path, const std::string& function_name)
{
    return repo + ":" + path + ":" + function_name;
}

json to_json(const SourceFragment& f)
{
    json j = {
        {"id", f.id},
        {"repo", f.repo},
        {"path", f.path},
        {"function_name", f.function_name},
        {"signature", f.signature},
        {"docstring", f.docstring},
        {"body", f.body},
        {"file_context", f.file_context},
    };
    j["license"] = f.license ? json(*f.license) : json(nullptr);
    return j;
}

namespace {

std::string required_string(const json& j, const char* field, bool allow_empty)
{
    if (!j.contains(field)) throw std::invalid_argument(std::string("missing field '") + field + "'");
    const auto& v = j[field];
    if (v.is_null() && allow_empty) return {};
    if (!v.is_string()) throw std::invalid_argument(std::string("field '") + field + "' is not a string");
    auto s = v.get<std::string>();
    if (!allow_empty && text::is_blank(s)) throw std::invalid_argument(std::string("field '") + field + "' is empty");
    return s;
}

bool header_parses(const std::string& signature)
{
    std::string header = text::dedent(signature);
    while (!header.empty() && (header.back() == '\n' || header.back() == ' ')) header.pop_back();
    if (header.empty() || header.back() != ':') return false;
    return python::parses(header + "\n    pass\n");
}

}  // namespace

SourceFragment fragment_from_json(const json& j)
{
    if (!j.is_object()) throw std::invalid_argument("record is not an object");
    SourceFragment f;
    f.repo = required_string(j, "repo", false);
    f.path = required_string(j, "path", false);
    f.function_name = required_string(j, "function_name", false);
    f.signature = required_string(j, "signature", false);
    f.docstring = required_string(j, "docstring", true);
    f.body = required_string(j, "body", false);
    f.file_context = required_string(j, "file_context", true);
    if (!j.contains("id")) throw std::invalid_argument("missing field 'id'");
    if (!j.contains("license")) throw std::invalid_argument("missing field 'license'");
    if (j["license"].is_string()) f.license = j["license"].get<std::string>();
    else if (!j["license"].is_null()) throw std::invalid_argument("field 'license' is not a string");
    if (!header_parses(f.signature)) throw std::invalid_argument("signature does not parse as a function header");
    f.id = stable_id(f.repo, f.path, f.function_name);
    return f;
}

LoadResult load_fragments(const std::filesystem::path& path, std::optional<std::size_t> limit)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read corpus " + path.string());
    LoadResult result;
    std::string line;
    std::size_t line_no = 0;
    while ((!limit || result.fragments.size() < *limit) && std::getline(in, line)) {
        ++line_no;
        if (text::is_blank(line)) continue;
        try {
            result.fragments.push_back(fragment_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            ++result.skipped;
            result.warnings.push_back(fmt::format("line {}: malformed record ({})", line_no, e.what()));
        } catch (const std::invalid_argument& e) {
            ++result.skipped;
            result.warnings.push_back(fmt::format("line {}: {}", line_no, e.what()));
        }
    }
    return result;
}

PrefilterDecision prefilter(const SourceFragment& frag, const std::vector<std::string>& io_keywords)
{
    if (io_keywords.empty()) throw std::invalid_argument("prefilter needs at least one keyword");
    if (text::is_blank(frag.file_context)) return {false, "missing_context"};
    for (const std::string* text : {&frag.body, &frag.file_context}) {
        if (auto hit = first_keyword_hit(*text, io_keywords)) return {false, hit->keyword};
    }
    return {true, ""};
}

}  // namespace codebench::corpus
