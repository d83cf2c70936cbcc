#include "factcheck/llm.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>

#include "factcheck/error.hpp"

namespace factcheck {

using nlohmann::json;

std::string_view to_string(TemplateName name) noexcept {
    switch (name) {
        case TemplateName::SEGMENT: return "SEGMENT";
        case TemplateName::DECONTEXT: return "DECONTEXT";
        case TemplateName::EDIT: return "EDIT";
        case TemplateName::RERANK: return "RERANK";
        case TemplateName::ENTAIL: return "ENTAIL";
    }
    return "SEGMENT";
}

TemplateName template_name_from_string(std::string_view s) {
    for (auto n : {TemplateName::SEGMENT, TemplateName::DECONTEXT, TemplateName::EDIT,
                   TemplateName::RERANK, TemplateName::ENTAIL}) {
        if (to_string(n) == s) return n;
    }
    throw ParseError("unknown template name '" + std::string(s) + "'");
}

namespace {

std::string substitute(const std::string& text, const PromptTemplate& tmpl,
                       const Bindings& bindings) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            auto close = text.find('}', i + 1);
            if (close != std::string::npos) {
                auto name = text.substr(i + 1, close - i - 1);
                if (tmpl.placeholders.count(name)) {
                    auto it = bindings.find(name);
                    if (it == bindings.end()) {
                        throw Error("missing binding for placeholder {" + name + "} in " +
                                    std::string(to_string(tmpl.name)));
                    }
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out.push_back(text[i++]);
    }
    return out;
}

}  // namespace

std::vector<Message> render(const PromptTemplate& tmpl, const Bindings& bindings) {
    for (const auto& p : tmpl.placeholders) {
        if (!bindings.count(p)) {
            throw Error("missing binding for placeholder {" + p + "} in " +
                        std::string(to_string(tmpl.name)));
        }
    }
    std::vector<Message> msgs;
    if (!tmpl.system_text.empty()) {
        msgs.push_back({"system", substitute(tmpl.system_text, tmpl, bindings)});
    }
    msgs.push_back({"user", substitute(tmpl.user_text, tmpl, bindings)});
    return msgs;
}

std::string normalize_key_text(std::string_view s) {
    std::string out;
    bool space = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            space = !out.empty();
            continue;
        }
        if (space) out.push_back(' ');
        space = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

// ---------------------------------------------------------------------------

OpenAiChatProvider::OpenAiChatProvider(ChatConfig cfg)
    : OpenAiChatProvider(cfg, make_http_transport(cfg.base_url, cfg.timeout)) {}

OpenAiChatProvider::OpenAiChatProvider(ChatConfig cfg, std::unique_ptr<HttpTransport> transport)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      limiter_(cfg_.max_in_flight, cfg_.requests_per_minute) {}

std::string OpenAiChatProvider::request_body(const LlmRequest& request) const {
    json messages = json::array();
    for (const auto& m : request.messages) {
        messages.push_back({{"role", m.role}, {"content", m.content}});
    }
    const auto& p = request.params;
    json body{{"model", p.model.empty() ? cfg_.model : p.model},
              {"messages", std::move(messages)},
              {"temperature", p.temperature},
              {"max_tokens", p.max_tokens}};
    if (p.seed) body["seed"] = *p.seed;
    return body.dump();
}

Completion OpenAiChatProvider::complete(const LlmRequest& request) {
    HttpHeaders headers;
    if (!cfg_.api_key_env.empty()) {
        const char* key = std::getenv(cfg_.api_key_env.c_str());
        if (!key) throw ConfigError("environment variable " + cfg_.api_key_env + " is not set");
        headers["Authorization"] = std::string("Bearer ") + key;
    }
    auto res = post_with_retry(*transport_, openai_endpoint_path(cfg_.base_url, "/chat/completions"),
                               request_body(request), headers, cfg_.retry, &limiter_);
    try {
        auto j = json::parse(res.body);
        Completion c;
        const auto& content = j.at("choices").at(0).at("message").at("content");
        c.text = content.is_null() ? std::string{} : content.get<std::string>();
        if (j.contains("usage") && j["usage"].is_object()) {
            c.tokens = TokenCounts{j["usage"].value("prompt_tokens", 0),
                                   j["usage"].value("completion_tokens", 0)};
        }
        return c;
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed chat completion response: ") + e.what(),
                            res.status, false);
    }
}

// ---------------------------------------------------------------------------

namespace {

std::string normalize_script_key(std::string_view key) {
    auto colon = key.find(':');
    if (colon == std::string_view::npos) return std::string(key);
    return std::string(key.substr(0, colon + 1)) + normalize_key_text(key.substr(colon + 1));
}

}  // namespace

ScriptedProvider::ScriptedProvider(ScriptFallback fallback) : fallback_(fallback) {}

ScriptedProvider ScriptedProvider::load(const std::filesystem::path& path, ScriptFallback fallback) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open script " + path.string());
    ScriptedProvider p(fallback);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (normalize_key_text(line).empty()) continue;
        try {
            auto j = json::parse(line);
            p.add(j.at("key").get<std::string>(), j.at("response").get<std::string>());
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": " + e.what(), line_no);
        } catch (const Error& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return p;
}

void ScriptedProvider::add(std::string key, std::string response) {
    auto norm = normalize_script_key(key);
    if (!script_.emplace(norm, std::move(response)).second) {
        throw Error("duplicate script key '" + key + "'");
    }
}

std::string ScriptedProvider::key_for(TemplateName name, const Bindings& bindings) {
    const auto& primary = prompt_template(name).primary_binding;
    auto it = bindings.find(primary);
    return std::string(to_string(name)) + ":" +
           normalize_key_text(it == bindings.end() ? std::string{} : it->second);
}

Completion ScriptedProvider::complete(const LlmRequest& request) {
    auto key = key_for(request.template_name, request.bindings);
    if (auto it = script_.find(key); it != script_.end()) return {it->second, std::nullopt};
    auto wildcard = std::string(to_string(request.template_name)) + ":*";
    if (auto it = script_.find(wildcard); it != script_.end()) return {it->second, std::nullopt};
    if (fallback_ == ScriptFallback::Echo) {
        const auto& primary = prompt_template(request.template_name).primary_binding;
        auto b = request.bindings.find(primary);
        return {b == request.bindings.end() ? std::string{} : b->second, std::nullopt};
    }
    throw Error("no scripted response for key '" + key + "'");
}

// ---------------------------------------------------------------------------

json to_json(const LlmExchange& e) {
    json msgs = json::array();
    for (const auto& m : e.rendered_messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    json j{{"template", e.template_name},
           {"stage", e.stage},
           {"messages", std::move(msgs)},
           {"raw_response", e.raw_response},
           {"provider", e.provider},
           {"latency_ms", e.latency_ms}};
    j["subclaim_index"] = e.subclaim_index ? json(*e.subclaim_index) : json(nullptr);
    j["round"] = e.round ? json(*e.round) : json(nullptr);
    j["token_counts"] = e.token_counts
                            ? json{{"prompt", e.token_counts->prompt},
                                   {"completion", e.token_counts->completion}}
                            : json(nullptr);
    if (e.error) j["error"] = *e.error;
    return j;
}

LlmExchange exchange_from_json(const json& j) {
    LlmExchange e;
    e.template_name = j.at("template").get<std::string>();
    e.stage = j.at("stage").get<std::string>();
    for (const auto& m : j.at("messages")) {
        e.rendered_messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    }
    e.raw_response = j.at("raw_response").get<std::string>();
    e.provider = j.at("provider").get<std::string>();
    e.latency_ms = j.value("latency_ms", std::int64_t{0});
    if (!j.value("subclaim_index", json()).is_null()) e.subclaim_index = j["subclaim_index"].get<int>();
    if (!j.value("round", json()).is_null()) e.round = j["round"].get<int>();
    if (!j.value("token_counts", json()).is_null()) {
        e.token_counts = TokenCounts{j["token_counts"].at("prompt").get<int>(),
                                     j["token_counts"].at("completion").get<int>()};
    }
    if (j.contains("error")) e.error = j["error"].get<std::string>();
    return e;
}

std::string LlmClient::complete(TemplateName name, const Bindings& bindings,
                                const Attribution& who) {
    LlmRequest req{name, bindings, render(prompt_template(name), bindings), params_};

    LlmExchange ex;
    ex.template_name = std::string(to_string(name));
    ex.rendered_messages = req.messages;
    ex.provider = provider_.name();
    ex.stage = who.stage;
    ex.subclaim_index = who.subclaim_index;
    ex.round = who.round;

    std::exception_ptr failure;
    auto start = std::chrono::steady_clock::now();
    try {
        auto c = provider_.complete(req);
        ex.raw_response = std::move(c.text);
        ex.token_counts = c.tokens;
    } catch (const std::exception& err) {
        ex.error = err.what();
        failure = std::current_exception();
    }
    ex.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - start)
                        .count();
    sink_.push_back(ex);
    if (failure) std::rethrow_exception(failure);
    return ex.raw_response;
}

}  // namespace factcheck
