#include "codebench/corpus/keywords.hpp"

#include "codebench/util/jsonl.hpp"
#include "codebench/util/text.hpp"

namespace codebench::corpus {

const std::vector<std::string>& banned_keywords()
{
    static const std::vector<std::string> list = {
        "os.kill",
        "terminate",
        "subprocess.call(['kill',",
        "subprocess.call(['rm',",
        "subprocess.call(['rmdir',",
        "subprocess.call([\"kill\",",
        "subprocess.call([\"rm\",",
        "subprocess.call([\"rmdir\",",
        "sys.exit",
        "os.unlink",
        ".unlink",
        ".rmdir",
        "os.remove",
        "os.removedirs",
        "os.rmdir",
        "os.system",
        "rmtree",
        "send2trash",
        "open(",
        ".read",
        ".write",
        ".load",
        ".dump",
        "shutil.",
        "glob.",
        "os.path.",
        "os.remove(",
        "os.rename(",
        "os.rmdir(",
        "os.mkdir(",
        "os.makedirs(",
        "os.listdir(",
        ".readlines(",
        ".writelines(",
        ".seek(",
        ".tell(",
    };
    return list;
}

const std::vector<std::string>& default_io_keywords()
{
    static const std::vector<std::string> list = [] {
        const auto& all = banned_keywords();
        auto first = std::find(all.begin(), all.end(), "open(");
        return std::vector<std::string>(first, all.end());
    }();
    return list;
}

std::vector<std::string> load_keyword_file(const std::filesystem::path& path)
{
    std::vector<std::string> out;
    for (auto& line : text::split_lines(read_text(path))) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::is_blank(line) || line.rfind("# ", 0) == 0) continue;
        out.push_back(line);
    }
    return out;
}

std::optional<KeywordHit> first_keyword_hit(std::string_view text, const std::vector<std::string>& keywords)
{
    std::optional<KeywordHit> best;
    for (const auto& k : keywords) {
        if (k.empty()) continue;
        auto pos = text.find(k);
        if (pos == std::string_view::npos) continue;
        bool better = !best || pos < best->position ||
                      (pos == best->position && (k.size() > best->keyword.size() ||
                                                 (k.size() == best->keyword.size() && k < best->keyword)));
        if (better) best = KeywordHit{k, pos};
    }
    return best;
}

}  // namespace codebench::corpus
