#include "codebench/llm/transcript.hpp"

#include <chrono>
#include <ctime>
#include <fmt/format.h>

namespace codebench::llm {

json to_json(const TranscriptEntry& e)
{
    return {
        {"request_hash", e.request_hash},
        {"request", to_json(e.request)},
        {"response", to_json(e.response)},
        {"timestamp", e.timestamp},
    };
}

TranscriptEntry transcript_entry_from_json(const json& j)
{
    TranscriptEntry e;
    e.request = request_from_json(j.at("request"));
    e.response = response_from_json(j.at("response"));
    e.request_hash = j.value("request_hash", std::string{});
    if (e.request_hash.empty()) e.request_hash = request_hash(e.request);
    e.timestamp = j.value("timestamp", std::string{});
    return e;
}

void Transcript::load(const std::filesystem::path& path)
{
    auto read = read_jsonl(path);
    if (read.malformed > 0) {
        throw std::runtime_error(fmt::format("transcript {} has {} malformed lines", path.string(), read.malformed));
    }
    for (const auto& record : read.records) {
        try {
            append(transcript_entry_from_json(record));
        } catch (const json::exception& e) {
            throw std::runtime_error("transcript " + path.string() + ": " + e.what());
        }
    }
}

void Transcript::attach_file(const std::filesystem::path& path, bool truncate)
{
    std::lock_guard lock(mutex_);
    if (truncate) std::filesystem::remove(path);
    sink_ = std::make_unique<JsonlAppender>(path);
}

void Transcript::append(TranscriptEntry entry)
{
    std::lock_guard lock(mutex_);
    if (sink_) sink_->append(to_json(entry));
    by_hash_[entry.request_hash].push_back(entries_.size());
    entries_.push_back(std::move(entry));
}

std::optional<ChatResponse> Transcript::next_for(const std::string& hash)
{
    std::lock_guard lock(mutex_);
    auto it = by_hash_.find(hash);
    if (it == by_hash_.end()) return std::nullopt;
    std::size_t& cursor = cursor_[hash];
    if (cursor >= it->second.size()) return std::nullopt;
    return entries_[it->second[cursor++]].response;
}

std::size_t Transcript::size() const
{
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::vector<TranscriptEntry> Transcript::entries() const
{
    std::lock_guard lock(mutex_);
    return entries_;
}

std::size_t Transcript::unconsumed() const
{
    std::lock_guard lock(mutex_);
    std::size_t used = 0;
    for (const auto& [hash, n] : cursor_) used += n;
    return entries_.size() - used;
}

std::string utc_timestamp()
{
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace codebench::llm
