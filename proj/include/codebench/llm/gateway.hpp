#pragma once

#include "codebench/llm/chat.hpp"
#include "codebench/llm/transcript.hpp"

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <semaphore>

namespace codebench::llm {

/// One provider round trip. Implementations throw LlmError and never retry themselves.
class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse send(const ChatRequest& req) = 0;
};

/// Backend answering through a callable; used for scripted fixtures and tests.
class FunctionBackend : public ChatBackend {
public:
    using Handler = std::function<ChatResponse(const ChatRequest&)>;
    explicit FunctionBackend(Handler handler) : handler_(std::move(handler)) {}
    ChatResponse send(const ChatRequest& req) override { return handler_(req); }

private:
    Handler handler_;
};

struct ProviderConfig {
    std::string base_url;     // e.g. https://api.openai.com/v1
    std::string model;        // provider-side model name; the alias is used when empty
    std::string api_key_env;  // env var holding the bearer token; empty = no auth header
    std::chrono::seconds timeout{180};
};

/// OpenAI-compatible POST {base_url}/chat/completions. Throws LlmError(auth) when the
/// credential variable is named but unset.
std::shared_ptr<ChatBackend> make_http_backend(const ProviderConfig& cfg);

enum class ReplayMode { live, record, replay, replay_strict };

ReplayMode parse_replay_mode(const std::string& s);
std::string to_string(ReplayMode m);

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double jitter = 0.25;  // fraction of the nominal delay added at random
};

struct GatewayOptions {
    ReplayMode mode = ReplayMode::live;
    std::size_t max_in_flight = 8;
    RetryPolicy retry;
    std::optional<std::filesystem::path> transcript_path;
    std::uint64_t jitter_seed = 0x5eed;
    std::function<void(std::chrono::milliseconds)> sleep;  // defaults to this_thread::sleep_for
};

struct GatewayStats {
    std::size_t requests = 0;
    std::size_t replayed = 0;
    std::size_t provider_calls = 0;
    std::size_t retries = 0;
};

class Gateway {
public:
    explicit Gateway(GatewayOptions options);
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    void add_model(const std::string& alias, std::shared_ptr<ChatBackend> backend);
    [[nodiscard]] bool has_model(const std::string& alias) const;

    /// Thread-safe. Returns exactly n_samples samples or throws LlmError.
    ChatResponse complete(const ChatRequest& req);

    [[nodiscard]] ReplayMode mode() const { return options_.mode; }
    Transcript& transcript() { return transcript_; }
    [[nodiscard]] GatewayStats stats() const;

private:
    ChatResponse call_provider(ChatBackend& backend, const ChatRequest& req);
    ChatResponse send_with_retry(ChatBackend& backend, const ChatRequest& req);
    std::chrono::milliseconds backoff(int attempt);

    GatewayOptions options_;
    std::map<std::string, std::shared_ptr<ChatBackend>> backends_;
    Transcript transcript_;
    std::counting_semaphore<4096> in_flight_;
    std::mutex rng_mutex_;
    std::mt19937_64 rng_;
    std::atomic<std::size_t> requests_{0}, replayed_{0}, provider_calls_{0}, retries_{0};
};

}  // namespace codebench::llm
