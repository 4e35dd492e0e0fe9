#include "codebench/util/jsonl.hpp"

#include <sstream>
#include <stdexcept>

namespace codebench {

JsonlReadResult read_jsonl(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    JsonlReadResult result;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            result.records.push_back(json::parse(line));
        } catch (const json::parse_error&) {
            ++result.malformed;
        }
    }
    return result;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records)
{
    std::ostringstream out;
    for (const auto& r : records) out << r.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    write_text(path, out.str());
}

void write_text(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

JsonlAppender::JsonlAppender(std::filesystem::path path) : path_(std::move(path))
{
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw std::runtime_error("cannot append to " + path_.string());
}

void JsonlAppender::append(const json& record)
{
    std::string line = record.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
    std::lock_guard lock(mutex_);
    out_ << line;
    out_.flush();
}

}  // namespace codebench
