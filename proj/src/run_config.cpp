#include "factcheck/run_config.hpp"

#include <fstream>
#include <set>

#include "factcheck/error.hpp"

namespace factcheck {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            std::string names;
            for (const auto& a : allowed) names += (names.empty() ? "" : ", ") + a;
            throw ConfigError("unknown key '" + key + "' in " + where + " (allowed: " + names + ")");
        }
    }
}

const json& object_at(const json& j, const std::string& key, const std::string& where) {
    const auto& v = j.at(key);
    if (!v.is_object()) throw ConfigError(where + "." + key + " must be an object");
    return v;
}

template <typename T>
void read(const json& j, const std::string& key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

std::size_t read_positive(const json& j, const std::string& key, std::size_t def,
                          const std::string& where) {
    if (!j.contains(key)) return def;
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() <= 0) {
        throw ConfigError(where + "." + key + " must be a positive integer");
    }
    return v.get<std::size_t>();
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void RunConfig::validate() const {
    pipeline.validate();
    if (dataset.empty()) throw ConfigError("config: dataset is required");
    if (corpus.empty()) throw ConfigError("config: corpus is required");
    if (pipeline.retriever == RetrieverKind::TFIDF && index.empty()) {
        throw ConfigError("config: index is required for the tfidf retriever");
    }
    if (pipeline.retriever == RetrieverKind::DENSE && embeddings_store.empty()) {
        throw ConfigError("config: embeddings.store is required for the dense retriever");
    }
    if (concurrency == 0) throw ConfigError("config: concurrency must be positive");
    if (eval_ks.empty()) throw ConfigError("config: eval_ks must not be empty");
    for (auto k : eval_ks) {
        if (k == 0) throw ConfigError("config: eval_ks entries must be positive");
    }
    if (match.jaccard_threshold <= 0.0 || match.jaccard_threshold > 1.0) {
        throw ConfigError("config: match.jaccard_threshold must be in (0, 1]");
    }
    if (llm_script.empty() && llm.base_url.empty()) throw ConfigError("config: llm.base_url is required");
    if (llm.temperature < 0.0) throw ConfigError("config: llm.temperature must be >= 0");
    if (llm.max_tokens <= 0) throw ConfigError("config: llm.max_tokens must be positive");
}

RunConfig parse_run_config(const json& j, const fs::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j,
                   {"dataset", "dataset_kind", "corpus", "index", "embeddings", "retriever", "k",
                    "retrieval_k", "edit_rounds", "mode", "ablations", "max_subclaims",
                    "pool_all_rounds", "llm", "concurrency", "output_dir", "seed", "match",
                    "eval_ks"},
                   "config");
    RunConfig c;
    std::string s;
    const std::string top = "config";

    s.clear();
    read(j, "dataset", s, top);
    c.dataset = resolve(base_dir, s);
    if (j.contains("dataset_kind")) {
        read(j, "dataset_kind", s, top);
        try {
            c.dataset_kind = dataset_kind_from_string(s);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    s.clear();
    read(j, "corpus", s, top);
    c.corpus = resolve(base_dir, s);
    s.clear();
    read(j, "index", s, top);
    c.index = resolve(base_dir, s);

    if (j.contains("embeddings")) {
        const auto& e = object_at(j, "embeddings", top);
        const std::string where = "config.embeddings";
        reject_unknown(e,
                       {"store", "kind", "base_url", "model", "api_key_env", "dim", "batch_size",
                        "max_in_flight", "timeout_ms"},
                       where);
        s.clear();
        read(e, "store", s, where);
        c.embeddings_store = resolve(base_dir, s);
        read(e, "kind", c.embeddings.kind, where);
        if (c.embeddings.kind != "http" && c.embeddings.kind != "hash") {
            throw ConfigError("config.embeddings.kind must be \"http\" or \"hash\"");
        }
        read(e, "base_url", c.embeddings.base_url, where);
        read(e, "model", c.embeddings.model, where);
        read(e, "api_key_env", c.embeddings.api_key_env, where);
        c.embeddings.dim = read_positive(e, "dim", c.embeddings.dim, where);
        c.embeddings.batch_size = read_positive(e, "batch_size", c.embeddings.batch_size, where);
        c.embeddings.max_in_flight = read_positive(e, "max_in_flight", c.embeddings.max_in_flight, where);
        c.embeddings.timeout = std::chrono::milliseconds(
            read_positive(e, "timeout_ms", static_cast<std::size_t>(c.embeddings.timeout.count()), where));
    }

    auto& p = c.pipeline;
    if (j.contains("retriever")) {
        read(j, "retriever", s, top);
        try {
            p.retriever = retriever_kind_from_string(s);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    p.k = read_positive(j, "k", p.k, top);
    if (j.contains("retrieval_k")) p.retrieval_k = read_positive(j, "retrieval_k", p.k, top);
    if (j.contains("edit_rounds")) {
        const auto& v = j.at("edit_rounds");
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
            throw ConfigError("config.edit_rounds must be a non-negative integer");
        }
        p.edit_rounds = v.get<int>();
    }
    if (j.contains("mode")) {
        read(j, "mode", s, top);
        try {
            p.mode = pipeline_mode_from_string(s);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    if (j.contains("ablations")) {
        const auto& a = object_at(j, "ablations", top);
        reject_unknown(a, {"no_segmentation", "paraphrase_without_evidence"}, "config.ablations");
        read(a, "no_segmentation", p.ablations.no_segmentation, "config.ablations");
        read(a, "paraphrase_without_evidence", p.ablations.paraphrase_without_evidence,
             "config.ablations");
    }
    p.max_subclaims = read_positive(j, "max_subclaims", p.max_subclaims, top);
    read(j, "pool_all_rounds", p.pool_all_rounds, top);

    if (j.contains("llm")) {
        const auto& l = object_at(j, "llm", top);
        const std::string where = "config.llm";
        reject_unknown(l,
                       {"base_url", "model", "api_key_env", "temperature", "max_tokens", "rpm",
                        "max_in_flight", "timeout_ms", "max_attempts", "script"},
                       where);
        read(l, "base_url", c.llm.base_url, where);
        read(l, "model", c.llm.model, where);
        read(l, "api_key_env", c.llm.api_key_env, where);
        read(l, "temperature", c.llm.temperature, where);
        read(l, "max_tokens", c.llm.max_tokens, where);
        read(l, "rpm", c.llm.requests_per_minute, where);
        c.llm.max_in_flight = read_positive(l, "max_in_flight", c.llm.max_in_flight, where);
        c.llm.timeout = std::chrono::milliseconds(
            read_positive(l, "timeout_ms", static_cast<std::size_t>(c.llm.timeout.count()), where));
        c.llm.retry.max_attempts = static_cast<int>(
            read_positive(l, "max_attempts", static_cast<std::size_t>(c.llm.retry.max_attempts), where));
        s.clear();
        read(l, "script", s, where);
        c.llm_script = resolve(base_dir, s);
    }
    c.concurrency = read_positive(j, "concurrency", c.concurrency, top);
    if (j.contains("output_dir")) {
        read(j, "output_dir", s, top);
        c.output_dir = resolve(base_dir, s);
    }
    if (j.contains("seed") && !j.at("seed").is_null()) {
        if (!j.at("seed").is_number_unsigned()) throw ConfigError("config.seed must be a non-negative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    if (j.contains("match")) {
        const auto& m = object_at(j, "match", top);
        reject_unknown(m, {"jaccard_threshold"}, "config.match");
        read(m, "jaccard_threshold", c.match.jaccard_threshold, "config.match");
    }
    if (j.contains("eval_ks")) read(j, "eval_ks", c.eval_ks, top);

    p.llm = LlmParams{c.llm.model, c.llm.temperature, c.llm.max_tokens, c.seed};
    c.llm.seed = c.seed;
    if (c.seed) {
        c.llm.retry.seed = *c.seed;
        c.embeddings.retry.seed = *c.seed;
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_run_config(j, path.parent_path());
}

namespace {

std::string abs_path(const fs::path& p) { return p.empty() ? std::string{} : fs::absolute(p).lexically_normal().string(); }

}  // namespace

json to_json(const RunConfig& c) {
    const auto& p = c.pipeline;
    json j{{"dataset", abs_path(c.dataset)},
           {"dataset_kind", to_string(c.dataset_kind)},
           {"corpus", abs_path(c.corpus)},
           {"index", abs_path(c.index)},
           {"retriever", to_string(p.retriever)},
           {"k", p.k},
           {"retrieval_k", p.retrieval_depth()},
           {"edit_rounds", p.edit_rounds},
           {"mode", to_string(p.mode)},
           {"ablations",
            {{"no_segmentation", p.ablations.no_segmentation},
             {"paraphrase_without_evidence", p.ablations.paraphrase_without_evidence}}},
           {"max_subclaims", p.max_subclaims},
           {"pool_all_rounds", p.pool_all_rounds},
           {"llm",
            {{"base_url", c.llm.base_url},
             {"model", c.llm.model},
             {"api_key_env", c.llm.api_key_env},
             {"temperature", c.llm.temperature},
             {"max_tokens", c.llm.max_tokens},
             {"rpm", c.llm.requests_per_minute},
             {"max_in_flight", c.llm.max_in_flight},
             {"timeout_ms", c.llm.timeout.count()},
             {"max_attempts", c.llm.retry.max_attempts},
             {"script", abs_path(c.llm_script)}}},
           {"concurrency", c.concurrency},
           {"output_dir", abs_path(c.output_dir)},
           {"seed", c.seed ? json(*c.seed) : json(nullptr)},
           {"match", {{"jaccard_threshold", c.match.jaccard_threshold}}},
           {"eval_ks", c.eval_ks}};
    if (!c.embeddings_store.empty()) {
        const auto& e = c.embeddings;
        j["embeddings"] = {{"store", abs_path(c.embeddings_store)},
                           {"kind", e.kind},
                           {"base_url", e.base_url},
                           {"model", e.model},
                           {"api_key_env", e.api_key_env},
                           {"dim", e.dim},
                           {"batch_size", e.batch_size},
                           {"max_in_flight", e.max_in_flight},
                           {"timeout_ms", e.timeout.count()}};
    }
    return j;
}

const std::vector<std::string>& ablation_variant_names() {
    static const std::vector<std::string> names{"full", "wo_editing", "wo_segmentation",
                                                "para_wo_evidence"};
    return names;
}

PipelineConfig ablation_variant(const PipelineConfig& base, std::string_view name) {
    PipelineConfig c = base;
    c.mode = PipelineMode::SUCEA;
    c.ablations = {};
    if (c.edit_rounds == 0) c.edit_rounds = 1;
    if (name == "full") return c;
    if (name == "wo_editing") {
        c.edit_rounds = 0;
        return c;
    }
    if (name == "wo_segmentation") {
        c.ablations.no_segmentation = true;
        return c;
    }
    if (name == "para_wo_evidence") {
        c.ablations.paraphrase_without_evidence = true;
        return c;
    }
    std::string valid;
    for (const auto& n : ablation_variant_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown ablation variant '" + std::string(name) + "' (valid: " + valid + ")");
}

std::string system_label(const PipelineConfig& config) {
    return config.mode == PipelineMode::RALM ? "RALM" : "SUCEA";
}

AblationGrid parse_ablation_grid(const json& j, RetrieverKind default_retriever) {
    if (!j.is_object()) throw ConfigError("grid must be a JSON object");
    reject_unknown(j, {"variants", "retrievers", "k"}, "grid");
    AblationGrid g;
    g.variants = ablation_variant_names();
    if (j.contains("variants")) {
        read(j, "variants", g.variants, "grid");
        if (g.variants.empty()) throw ConfigError("grid.variants must list at least one variant");
    }
    for (const auto& v : g.variants) ablation_variant(PipelineConfig{}, v);
    std::vector<std::string> names;
    read(j, "retrievers", names, "grid");
    for (const auto& n : names) {
        try {
            g.retrievers.push_back(retriever_kind_from_string(n));
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
    }
    if (g.retrievers.empty()) g.retrievers.push_back(default_retriever);
    g.ks = {3, 5, 10};
    if (j.contains("k")) {
        read(j, "k", g.ks, "grid");
        if (g.ks.empty()) throw ConfigError("grid.k must not be empty");
        for (auto k : g.ks) {
            if (k == 0) throw ConfigError("grid.k entries must be positive");
        }
    }
    return g;
}

AblationGrid load_ablation_grid(const fs::path& path, RetrieverKind default_retriever) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open grid " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_ablation_grid(j, default_retriever);
}

}  // namespace factcheck
