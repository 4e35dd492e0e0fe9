#pragma once

#include "codebench/util/jsonl.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace codebench::llm {

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model_id;
    std::vector<ChatMessage> messages;
    double temperature = 0.3;
    double top_p = 0.95;
    std::size_t n_samples = 1;
    std::optional<std::size_t> max_tokens;
    std::vector<std::string> stop;
};

struct Usage {
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
};

struct ChatResponse {
    std::vector<std::string> samples;
    Usage usage;
    json provider_meta = json::object();
};

/// Throws std::invalid_argument when the request violates its invariants.
void validate(const ChatRequest& req);

json to_json(const ChatRequest& req);
ChatRequest request_from_json(const json& j);
json to_json(const ChatResponse& resp);
ChatResponse response_from_json(const json& j);

/// Content hash of the canonical (key-sorted, compact) serialization of the request.
std::string request_hash(const ChatRequest& req);

/// Convenience: a single user turn with an optional system preamble.
ChatRequest make_request(std::string model_id, std::string user_prompt, double temperature, double top_p,
                         std::size_t n_samples = 1, std::string system_prompt = {});

class LlmError : public std::runtime_error {
public:
    enum class Kind { auth, rate_limited, transport, server, protocol, refusal, fixture_miss, config };

    LlmError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] bool retryable() const
    {
        return kind_ == Kind::rate_limited || kind_ == Kind::transport || kind_ == Kind::server;
    }

private:
    Kind kind_;
};

/// Content of the first fenced block (``` with optional language tag); the text itself when
/// it contains no fence.
std::string extract_code_block(const std::string& sample);

/// Contents of every complete fenced block, in order.
std::vector<std::string> extract_code_blocks(const std::string& sample);

}  // namespace codebench::llm
