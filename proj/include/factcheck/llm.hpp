#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "factcheck/http.hpp"

namespace factcheck {

enum class TemplateName { SEGMENT, DECONTEXT, EDIT, RERANK, ENTAIL };

std::string_view to_string(TemplateName name) noexcept;
TemplateName template_name_from_string(std::string_view s);

using Bindings = std::map<std::string, std::string>;

struct Message {
    std::string role;  // "system" or "user"
    std::string content;

    bool operator==(const Message&) const = default;
};

/// One of the five stage prompts. `system_text` is empty for prompts that are sent as a single
/// user turn. Placeholders appear as "{name}" in either text.
struct PromptTemplate {
    TemplateName name;
    std::string system_text;
    std::string user_text;
    std::set<std::string> placeholders;
    /// Binding that identifies the request for scripted lookups (e.g. "sen" for SEGMENT).
    std::string primary_binding;
};

const PromptTemplate& prompt_template(TemplateName name);

/// Substitutes every placeholder; throws Error naming the first unbound placeholder.
std::vector<Message> render(const PromptTemplate& tmpl, const Bindings& bindings);

struct LlmParams {
    std::string model;
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::uint64_t> seed;
};

struct LlmRequest {
    TemplateName template_name;
    Bindings bindings;
    std::vector<Message> messages;
    LlmParams params;
};

struct TokenCounts {
    int prompt = 0;
    int completion = 0;
    bool operator==(const TokenCounts&) const = default;
};

struct Completion {
    std::string text;
    std::optional<TokenCounts> tokens;
};

class LlmProvider {
public:
    virtual ~LlmProvider() = default;
    virtual std::string name() const = 0;
    /// Must be safe to call from several threads at once.
    virtual Completion complete(const LlmRequest& request) = 0;
};

struct ChatConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "gpt-4o-mini";
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 0.0;
    int max_tokens = 1024;
    std::optional<std::uint64_t> seed;
    std::chrono::milliseconds timeout{120'000};
    RetryPolicy retry;
    std::size_t max_in_flight = 8;
    double requests_per_minute = 0.0;  // 0 = unlimited
};

/// OpenAI-compatible chat-completions client (POST .../v1/chat/completions).
class OpenAiChatProvider final : public LlmProvider {
public:
    explicit OpenAiChatProvider(ChatConfig cfg);
    OpenAiChatProvider(ChatConfig cfg, std::unique_ptr<HttpTransport> transport);

    std::string name() const override { return "openai:" + cfg_.model; }
    Completion complete(const LlmRequest& request) override;

    std::string request_body(const LlmRequest& request) const;
    const ChatConfig& config() const { return cfg_; }

private:
    ChatConfig cfg_;
    std::unique_ptr<HttpTransport> transport_;
    RateLimiter limiter_;
};

enum class ScriptFallback { Error, Echo };

/// Offline provider answering from a fixed script. Lookup key is
/// "<TEMPLATE>:<normalized primary binding>", falling back to "<TEMPLATE>:*". Unknown keys
/// either throw or echo the primary binding value.
class ScriptedProvider final : public LlmProvider {
public:
    explicit ScriptedProvider(ScriptFallback fallback = ScriptFallback::Error);

    /// JSONL {"key", "response"}; duplicate keys are a load error.
    static ScriptedProvider load(const std::filesystem::path& path,
                                 ScriptFallback fallback = ScriptFallback::Error);

    void add(std::string key, std::string response);
    std::string name() const override { return "scripted"; }
    Completion complete(const LlmRequest& request) override;

    static std::string key_for(TemplateName name, const Bindings& bindings);

private:
    ScriptFallback fallback_;
    std::unordered_map<std::string, std::string> script_;
};

/// Trims and collapses internal whitespace runs to one space.
std::string normalize_key_text(std::string_view s);

struct LlmExchange {
    std::string template_name;
    std::vector<Message> rendered_messages;
    std::string raw_response;
    std::string provider;
    std::int64_t latency_ms = 0;
    std::optional<TokenCounts> token_counts;
    /// Attribution: pipeline stage plus sub-claim/round when the call is sub-claim scoped.
    std::string stage;
    std::optional<int> subclaim_index;
    std::optional<int> round;
    /// Set when the provider call failed; raw_response is then empty.
    std::optional<std::string> error;
};

nlohmann::json to_json(const LlmExchange& e);
LlmExchange exchange_from_json(const nlohmann::json& j);

struct Attribution {
    Attribution() = default;
    Attribution(std::string s, std::optional<int> sub = std::nullopt, std::optional<int> r = std::nullopt)
        : stage(std::move(s)), subclaim_index(sub), round(r) {}

    std::string stage;
    std::optional<int> subclaim_index;
    std::optional<int> round;
};

/// Front door for every model call made on behalf of one claim: renders the template, calls the
/// provider and appends exactly one exchange to the sink.
class LlmClient {
public:
    LlmClient(LlmProvider& provider, LlmParams params, std::vector<LlmExchange>& sink)
        : provider_(provider), params_(std::move(params)), sink_(sink) {}

    /// Returns the raw completion text.
    std::string complete(TemplateName name, const Bindings& bindings, const Attribution& who);

private:
    LlmProvider& provider_;
    LlmParams params_;
    std::vector<LlmExchange>& sink_;
};

}  // namespace factcheck
