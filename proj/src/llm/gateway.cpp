#include "codebench/llm/gateway.hpp"

#include "codebench/util/text.hpp"

#include <fmt/format.h>
#include <thread>

namespace codebench::llm {

ReplayMode parse_replay_mode(const std::string& s)
{
    if (s == "live") return ReplayMode::live;
    if (s == "record") return ReplayMode::record;
    if (s == "replay") return ReplayMode::replay;
    if (s == "replay-strict" || s == "replay_strict") return ReplayMode::replay_strict;
    throw std::invalid_argument("unknown replay mode '" + s + "'");
}

std::string to_string(ReplayMode m)
{
    switch (m) {
    case ReplayMode::live: return "live";
    case ReplayMode::record: return "record";
    case ReplayMode::replay: return "replay";
    case ReplayMode::replay_strict: return "replay-strict";
    }
    return "?";
}

namespace {

std::ptrdiff_t clamp_in_flight(std::size_t n)
{
    if (n == 0) throw std::invalid_argument("max_in_flight must be positive");
    return static_cast<std::ptrdiff_t>(std::min<std::size_t>(n, 4096));
}

struct SlotGuard {
    std::counting_semaphore<4096>& sem;
    explicit SlotGuard(std::counting_semaphore<4096>& s) : sem(s) { sem.acquire(); }
    ~SlotGuard() { sem.release(); }
};

bool is_refusal(const ChatResponse& resp)
{
    for (const auto& s : resp.samples) {
        if (!text::is_blank(s)) return false;
    }
    return true;
}

}  // namespace

Gateway::Gateway(GatewayOptions options)
    : options_(std::move(options)), in_flight_(clamp_in_flight(options_.max_in_flight)), rng_(options_.jitter_seed)
{
    if (options_.retry.max_attempts < 1) throw std::invalid_argument("retry attempts must be positive");
    if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    switch (options_.mode) {
    case ReplayMode::live:
        if (options_.transcript_path) transcript_.attach_file(*options_.transcript_path, false);
        break;
    case ReplayMode::record:
        if (!options_.transcript_path) throw std::invalid_argument("record mode needs a transcript path");
        transcript_.attach_file(*options_.transcript_path, true);
        break;
    case ReplayMode::replay:
    case ReplayMode::replay_strict:
        if (!options_.transcript_path) throw std::invalid_argument("replay mode needs a transcript path");
        transcript_.load(*options_.transcript_path);
        break;
    }
}

Gateway::~Gateway() = default;

void Gateway::add_model(const std::string& alias, std::shared_ptr<ChatBackend> backend)
{
    backends_[alias] = std::move(backend);
}

bool Gateway::has_model(const std::string& alias) const
{
    return backends_.count(alias) > 0;
}

GatewayStats Gateway::stats() const
{
    return {requests_.load(), replayed_.load(), provider_calls_.load(), retries_.load()};
}

ChatResponse Gateway::complete(const ChatRequest& req)
{
    validate(req);
    ++requests_;
    const std::string hash = request_hash(req);

    std::optional<ChatResponse> resp;
    if (options_.mode == ReplayMode::replay || options_.mode == ReplayMode::replay_strict) {
        resp = transcript_.next_for(hash);
        if (resp) ++replayed_;
        if (!resp && options_.mode == ReplayMode::replay_strict) {
            throw LlmError(LlmError::Kind::fixture_miss, "fixture miss: " + hash);
        }
        if (!resp && !has_model(req.model_id)) {
            throw LlmError(LlmError::Kind::fixture_miss, "fixture miss: " + hash + " (no live backend)");
        }
    }
    if (!resp) {
        auto it = backends_.find(req.model_id);
        if (it == backends_.end()) {
            throw LlmError(LlmError::Kind::config, "no provider configured for model alias '" + req.model_id + "'");
        }
        resp = call_provider(*it->second, req);
        // Refusals are recorded too so that replay reproduces them.
        transcript_.append({hash, req, *resp, utc_timestamp()});
    }

    if (is_refusal(*resp)) throw LlmError(LlmError::Kind::refusal, "provider returned no content");
    if (resp->samples.size() != req.n_samples) {
        throw LlmError(LlmError::Kind::protocol,
                       fmt::format("expected {} samples, got {}", req.n_samples, resp->samples.size()));
    }
    return *resp;
}

ChatResponse Gateway::call_provider(ChatBackend& backend, const ChatRequest& req)
{
    // Providers may return fewer choices than asked; top up with follow-up requests, bounded by n.
    ChatResponse total;
    for (std::size_t round = 0; round < req.n_samples && total.samples.size() < req.n_samples; ++round) {
        ChatRequest part = req;
        part.n_samples = req.n_samples - total.samples.size();
        ChatResponse r = send_with_retry(backend, part);
        if (r.samples.empty()) break;
        for (auto& s : r.samples) {
            if (total.samples.size() < req.n_samples) total.samples.push_back(std::move(s));
        }
        total.usage.prompt_tokens += r.usage.prompt_tokens;
        total.usage.completion_tokens += r.usage.completion_tokens;
        if (total.provider_meta.empty()) total.provider_meta = r.provider_meta;
    }
    return total;
}

ChatResponse Gateway::send_with_retry(ChatBackend& backend, const ChatRequest& req)
{
    for (int attempt = 0;; ++attempt) {
        try {
            SlotGuard slot(in_flight_);
            ++provider_calls_;
            return backend.send(req);
        } catch (const LlmError& e) {
            if (!e.retryable()) throw;
            if (attempt + 1 >= options_.retry.max_attempts) {
                if (e.kind() == LlmError::Kind::rate_limited) {
                    throw LlmError(LlmError::Kind::rate_limited,
                                   fmt::format("rate limit exhausted after {} attempts: {}", attempt + 1, e.what()));
                }
                throw LlmError(e.kind(), fmt::format("giving up after {} attempts: {}", attempt + 1, e.what()));
            }
        }
        ++retries_;
        options_.sleep(backoff(attempt));
    }
}

std::chrono::milliseconds Gateway::backoff(int attempt)
{
    auto nominal = options_.retry.base_delay * (1LL << std::min(attempt, 20));
    double extra = 0.0;
    if (options_.retry.jitter > 0.0) {
        std::lock_guard lock(rng_mutex_);
        extra = std::uniform_real_distribution<double>(0.0, options_.retry.jitter)(rng_);
    }
    return nominal + std::chrono::milliseconds(static_cast<long long>(static_cast<double>(nominal.count()) * extra));
}

}  // namespace codebench::llm
