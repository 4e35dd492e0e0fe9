#include "codebench/pipeline/templates.hpp"

#include "codebench/util/errors.hpp"
#include "codebench/util/jsonl.hpp"

#include <cstdlib>
#include <stdexcept>

namespace codebench::pipeline {

std::filesystem::path default_data_dir()
{
    if (const char* dir = std::getenv("CODEBENCH_DATA_DIR"); dir && *dir) return dir;
    return CODEBENCH_DATA_DIR;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir)
{
    TemplateSet set;
    for (const char* stage : stages) {
        auto path = dir / (std::string(stage) + ".txt");
        if (!std::filesystem::is_regular_file(path)) throw ConfigError("missing prompt template " + path.string());
        set.templates_[stage] = read_text(path);
    }
    return set;
}

const TemplateSet& TemplateSet::builtin()
{
    static const TemplateSet set = load(default_data_dir() / "templates");
    return set;
}

void TemplateSet::set(const std::string& stage, std::string text)
{
    templates_[stage] = std::move(text);
}

std::string TemplateSet::render(const std::string& stage, const std::map<std::string, std::string>& vars) const
{
    auto it = templates_.find(stage);
    if (it == templates_.end()) throw std::invalid_argument("unknown prompt template: " + stage);
    const std::string& tpl = it->second;
    std::string out;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = tpl.find("{{", pos);
        if (open == std::string::npos) break;
        std::size_t close = tpl.find("}}", open + 2);
        if (close == std::string::npos) break;
        std::string key = tpl.substr(open + 2, close - open - 2);
        auto v = vars.find(key);
        if (v == vars.end()) throw std::invalid_argument("template " + stage + " needs a value for {{" + key + "}}");
        out.append(tpl, pos, open - pos);
        out += v->second;
        pos = close + 2;
    }
    out.append(tpl, pos, std::string::npos);
    return out;
}

}  // namespace codebench::pipeline
