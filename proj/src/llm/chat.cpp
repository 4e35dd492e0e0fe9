#include "codebench/llm/chat.hpp"

#include "codebench/util/hash.hpp"

namespace codebench::llm {

void validate(const ChatRequest& req)
{
    if (req.messages.empty()) throw std::invalid_argument("chat request has no messages");
    for (const auto& m : req.messages) {
        if (m.role != "system" && m.role != "user" && m.role != "assistant") {
            throw std::invalid_argument("unknown chat role '" + m.role + "'");
        }
    }
    for (const auto& m : req.messages) {
        if (m.role == "system") continue;
        if (m.role != "user") throw std::invalid_argument("first non-system message must be from the user");
        break;
    }
    if (req.temperature < 0.0 || req.temperature > 2.0) throw std::invalid_argument("temperature outside [0, 2]");
    if (req.top_p <= 0.0 || req.top_p > 1.0) throw std::invalid_argument("top_p outside (0, 1]");
    if (req.n_samples == 0) throw std::invalid_argument("n_samples must be positive");
}

json to_json(const ChatRequest& req)
{
    json messages = json::array();
    for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    json j = {
        {"model_id", req.model_id},
        {"messages", messages},
        {"temperature", req.temperature},
        {"top_p", req.top_p},
        {"n_samples", req.n_samples},
        {"stop", req.stop},
    };
    j["max_tokens"] = req.max_tokens ? json(*req.max_tokens) : json(nullptr);
    return j;
}

ChatRequest request_from_json(const json& j)
{
    ChatRequest req;
    req.model_id = j.at("model_id").get<std::string>();
    for (const auto& m : j.at("messages")) {
        req.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    req.temperature = j.at("temperature").get<double>();
    req.top_p = j.at("top_p").get<double>();
    req.n_samples = j.at("n_samples").get<std::size_t>();
    if (j.contains("max_tokens") && !j["max_tokens"].is_null()) req.max_tokens = j["max_tokens"].get<std::size_t>();
    if (j.contains("stop")) req.stop = j["stop"].get<std::vector<std::string>>();
    return req;
}

json to_json(const ChatResponse& resp)
{
    return {
        {"samples", resp.samples},
        {"usage", {{"prompt_tokens", resp.usage.prompt_tokens}, {"completion_tokens", resp.usage.completion_tokens}}},
        {"provider_meta", resp.provider_meta},
    };
}

ChatResponse response_from_json(const json& j)
{
    ChatResponse resp;
    resp.samples = j.at("samples").get<std::vector<std::string>>();
    if (j.contains("usage")) {
        resp.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
        resp.usage.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
    }
    if (j.contains("provider_meta")) resp.provider_meta = j["provider_meta"];
    return resp;
}

std::string request_hash(const ChatRequest& req)
{
    return sha256_hex(to_json(req).dump(-1, ' ', false, json::error_handler_t::replace));
}

ChatRequest make_request(std::string model_id, std::string user_prompt, double temperature, double top_p,
                         std::size_t n_samples, std::string system_prompt)
{
    ChatRequest req;
    req.model_id = std::move(model_id);
    if (!system_prompt.empty()) req.messages.push_back({"system", std::move(system_prompt)});
    req.messages.push_back({"user", std::move(user_prompt)});
    req.temperature = temperature;
    req.top_p = top_p;
    req.n_samples = n_samples;
    return req;
}

namespace {

struct Fence {
    std::size_t content_begin;
    std::size_t content_end;
    std::size_t after;
};

std::optional<Fence> next_fence(const std::string& s, std::size_t from)
{
    std::size_t open = s.find("```", from);
    if (open == std::string::npos) return std::nullopt;
    std::size_t line_end = s.find('\n', open + 3);
    if (line_end == std::string::npos) return std::nullopt;
    std::size_t begin = line_end + 1;
    std::size_t close = s.find("```", begin);
    if (close == std::string::npos) return std::nullopt;
    std::size_t end = close;
    if (end > begin && s[end - 1] == '\n') --end;
    return Fence{begin, end, close + 3};
}

}  // namespace

std::string extract_code_block(const std::string& sample)
{
    auto fence = next_fence(sample, 0);
    if (!fence) return sample;
    return sample.substr(fence->content_begin, fence->content_end - fence->content_begin);
}

std::vector<std::string> extract_code_blocks(const std::string& sample)
{
    std::vector<std::string> blocks;
    std::size_t pos = 0;
    while (auto fence = next_fence(sample, pos)) {
        blocks.push_back(sample.substr(fence->content_begin, fence->content_end - fence->content_begin));
        pos = fence->after;
    }
    return blocks;
}

}  // namespace codebench::llm
