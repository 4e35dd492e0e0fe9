#pragma once

#include "codebench/llm/chat.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

namespace codebench::llm {

struct TranscriptEntry {
    std::string request_hash;
    ChatRequest request;
    ChatResponse response;
    std::string timestamp;
};

json to_json(const TranscriptEntry& e);
TranscriptEntry transcript_entry_from_json(const json& j);

/// Append-only record of gateway exchanges. Replay is occurrence-indexed: the i-th lookup of a
/// hash returns the i-th recorded entry with that hash, so a request issued twice (for example a
/// regeneration with identical prompt) replays both recorded answers in order.
class Transcript {
public:
    Transcript() = default;

    /// Adds every entry of an existing file (throws std::runtime_error on unreadable or malformed
    /// content).
    void load(const std::filesystem::path& path);

    /// Starts writing to path; truncate=false appends to an existing file.
    void attach_file(const std::filesystem::path& path, bool truncate);

    void append(TranscriptEntry entry);
    std::optional<ChatResponse> next_for(const std::string& request_hash);

    [[nodiscard]] std::size_t size() const;
    [[nodiscard]] std::vector<TranscriptEntry> entries() const;
    /// Entries never handed out by next_for.
    [[nodiscard]] std::size_t unconsumed() const;

private:
    mutable std::mutex mutex_;
    std::vector<TranscriptEntry> entries_;
    std::map<std::string, std::vector<std::size_t>> by_hash_;
    std::map<std::string, std::size_t> cursor_;
    std::unique_ptr<JsonlAppender> sink_;
};

std::string utc_timestamp();

}  // namespace codebench::llm
