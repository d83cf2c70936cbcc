#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factcheck/dense.hpp"
#include "factcheck/eval.hpp"
#include "factcheck/llm.hpp"
#include "factcheck/pipeline.hpp"
#include "factcheck/types.hpp"

namespace factcheck {

/// One experiment: data locations, pipeline settings and the model endpoint.
struct RunConfig {
    std::filesystem::path dataset;
    DatasetKind dataset_kind = DatasetKind::CUSTOM;
    std::filesystem::path corpus;
    std::filesystem::path index;
    std::filesystem::path embeddings_store;  // empty unless the dense retriever is used
    EmbeddingConfig embeddings;
    PipelineConfig pipeline;
    ChatConfig llm;
    /// Scripted responses instead of a live endpoint.
    std::filesystem::path llm_script;
    std::size_t concurrency = 1;
    std::filesystem::path output_dir = "runs/latest";
    std::optional<std::uint64_t> seed;
    MatchParams match;
    std::vector<std::size_t> eval_ks{3, 5, 10};

    /// Throws ConfigError on inconsistent settings, before anything touches the network.
    void validate() const;
};

/// Fixed ablation vocabulary: full, wo_editing, wo_segmentation, para_wo_evidence.
const std::vector<std::string>& ablation_variant_names();

/// `base` with the named ablation applied (always SUCEA mode). Unknown names throw
/// ConfigError listing the valid ones.
PipelineConfig ablation_variant(const PipelineConfig& base, std::string_view name);

/// Variants x retrievers x k. Every variant name is checked against the fixed vocabulary.
struct AblationGrid {
    std::vector<std::string> variants;
    std::vector<RetrieverKind> retrievers;
    std::vector<std::size_t> ks;
};

/// JSON {"variants": [...], "retrievers": [...], "k": [...]}; variants default to all of
/// them, retrievers to `default_retriever`, k to {3, 5, 10}.
AblationGrid parse_ablation_grid(const nlohmann::json& j, RetrieverKind default_retriever);
AblationGrid load_ablation_grid(const std::filesystem::path& path, RetrieverKind default_retriever);

/// Row label for reports: "RALM" or "SUCEA".
std::string system_label(const PipelineConfig& config);

/// Unknown keys and wrong types are rejected. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical snapshot with every field explicit; reparses to an equivalent config.
nlohmann::json to_json(const RunConfig& c);

}  // namespace factcheck
