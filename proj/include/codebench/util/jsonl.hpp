#pragma once

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

namespace codebench {

using json = nlohmann::json;

struct JsonlReadResult {
    std::vector<json> records;
    std::size_t malformed = 0;
};

/// Reads a line-delimited JSON file. Blank lines are ignored; unparsable lines are counted.
/// Throws std::runtime_error if the file cannot be opened.
JsonlReadResult read_jsonl(const std::filesystem::path& path);

/// Writes records one per line, replacing the file.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

/// Thread-safe append-only writer; every record is flushed as soon as it is written.
class JsonlAppender {
public:
    explicit JsonlAppender(std::filesystem::path path);

    void append(const json& record);
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::mutex mutex_;
    std::ofstream out_;
};

}  // namespace codebench
