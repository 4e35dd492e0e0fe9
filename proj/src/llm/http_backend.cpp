#include "codebench/llm/gateway.hpp"

#include <httplib.h>

#include <cstdlib>
#include <fmt/format.h>

namespace codebench::llm {

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string path;    // prefix ending without '/'
};

Endpoint split_base_url(const std::string& base_url)
{
    auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) throw LlmError(LlmError::Kind::config, "base_url needs a scheme: " + base_url);
    auto path_begin = base_url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.origin = base_url.substr(0, path_begin);
    ep.path = path_begin == std::string::npos ? "" : base_url.substr(path_begin);
    while (!ep.path.empty() && ep.path.back() == '/') ep.path.pop_back();
    return ep;
}

class HttpChatBackend : public ChatBackend {
public:
    HttpChatBackend(ProviderConfig cfg, std::string api_key)
        : cfg_(std::move(cfg)), endpoint_(split_base_url(cfg_.base_url)), api_key_(std::move(api_key))
    {
    }

    ChatResponse send(const ChatRequest& req) override
    {
        json body = {
            {"model", cfg_.model.empty() ? req.model_id : cfg_.model},
            {"temperature", req.temperature},
            {"top_p", req.top_p},
            {"n", req.n_samples},
        };
        json messages = json::array();
        for (const auto& m : req.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
        body["messages"] = std::move(messages);
        if (req.max_tokens) body["max_tokens"] = *req.max_tokens;
        if (!req.stop.empty()) body["stop"] = req.stop;

        httplib::Client client(endpoint_.origin);
        client.set_connection_timeout(std::chrono::seconds(10));
        client.set_read_timeout(cfg_.timeout);
        client.set_write_timeout(cfg_.timeout);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        auto res = client.Post(endpoint_.path + "/chat/completions", headers,
                               body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json");
        if (!res) {
            throw LlmError(LlmError::Kind::transport, "transport error: " + httplib::to_string(res.error()));
        }
        const int status = res->status;
        std::string snippet = res->body.substr(0, 300);
        if (status == 401 || status == 403) throw LlmError(LlmError::Kind::auth, fmt::format("HTTP {}: {}", status, snippet));
        if (status == 429) throw LlmError(LlmError::Kind::rate_limited, fmt::format("HTTP 429: {}", snippet));
        if (status >= 500) throw LlmError(LlmError::Kind::server, fmt::format("HTTP {}: {}", status, snippet));
        if (status != 200) throw LlmError(LlmError::Kind::protocol, fmt::format("HTTP {}: {}", status, snippet));
        return parse(res->body);
    }

private:
    static ChatResponse parse(const std::string& body)
    {
        json j;
        try {
            j = json::parse(body);
        } catch (const json::parse_error& e) {
            throw LlmError(LlmError::Kind::protocol, std::string("unparsable provider response: ") + e.what());
        }
        if (!j.contains("choices") || !j["choices"].is_array()) {
            throw LlmError(LlmError::Kind::protocol, "provider response without choices");
        }
        ChatResponse resp;
        json finish = json::array();
        for (const auto& choice : j["choices"]) {
            std::string reason = choice.value("finish_reason", std::string{});
            finish.push_back(reason);
            std::string content;
            if (choice.contains("message") && choice["message"].contains("content") &&
                choice["message"]["content"].is_string()) {
                content = choice["message"]["content"].get<std::string>();
            }
            if (reason == "content_filter") content.clear();
            resp.samples.push_back(std::move(content));
        }
        if (j.contains("usage") && j["usage"].is_object()) {
            resp.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
            resp.usage.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
        }
        resp.provider_meta = {{"id", j.value("id", std::string{})},
                              {"model", j.value("model", std::string{})},
                              {"finish_reasons", finish}};
        return resp;
    }

    ProviderConfig cfg_;
    Endpoint endpoint_;
    std::string api_key_;
};

}  // namespace

std::shared_ptr<ChatBackend> make_http_backend(const ProviderConfig& cfg)
{
    std::string key;
    if (!cfg.api_key_env.empty()) {
        const char* v = std::getenv(cfg.api_key_env.c_str());
        if (v == nullptr || *v == '\0') {
            throw LlmError(LlmError::Kind::auth, "credentials missing: environment variable " + cfg.api_key_env + " is unset");
        }
        key = v;
    }
    return std::make_shared<HttpChatBackend>(cfg, std::move(key));
}

}  // namespace codebench::llm
