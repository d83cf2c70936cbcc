#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "factcheck/corpus.hpp"
#include "factcheck/pipeline.hpp"
#include "factcheck/types.hpp"

namespace factcheck {

struct MatchParams {
    double jaccard_threshold = 0.5;
    bool operator==(const MatchParams&) const = default;
};

/// True iff the ids agree, or (same normalized page) the normalized gold sentence occurs in the
/// normalized passage text or their token-set Jaccard reaches the threshold.
bool match_passage_to_gold(const Passage& passage, const GoldEvidenceRef& gold,
                           const MatchParams& params = {});

double token_jaccard(std::string_view a, std::string_view b);

struct RetrievalJudgment {
    std::string claim_id;
    std::set<std::size_t> matched_gold;
    std::size_t gold_count = 0;
    std::size_t k = 0;
    bool hit = false;
};

/// Judges the first k of `retrieved` (already in rank order) against the gold list.
RetrievalJudgment judge_retrieval(const std::string& claim_id, const std::vector<Passage>& retrieved,
                                  const std::vector<GoldEvidenceRef>& gold, std::size_t k,
                                  const MatchParams& params = {});

/// Fraction of claims with a hit. Throws on empty input.
double retrieval_accuracy(const std::vector<RetrievalJudgment>& judgments);

/// Macro average over claims of |matched gold| / |gold|. Throws on empty input.
double recall_at_k(const std::vector<RetrievalJudgment>& judgments);

struct LabelBreakdown {
    std::size_t correct = 0;
    std::size_t total = 0;
    double rate() const { return total ? static_cast<double>(correct) / total : 0.0; }
    bool operator==(const LabelBreakdown&) const = default;
};

struct FactAccuracy {
    double accuracy = 0.0;
    std::map<VerdictLabel, LabelBreakdown> per_label;
    std::size_t missing = 0;
};

/// Exact-match accuracy over every gold claim; a claim without a prediction counts as wrong.
FactAccuracy fact_accuracy(const std::map<std::string, VerdictLabel>& predictions,
                           const std::vector<ClaimRecord>& gold);

struct RunReport {
    std::string system;
    std::string retriever;
    std::size_t n_claims = 0;
    double accuracy = 0.0;
    std::map<std::size_t, double> racc_by_k;
    std::map<std::size_t, double> recall_by_k;
    std::map<VerdictLabel, LabelBreakdown> per_label;
    std::size_t excluded_empty_gold = 0;
    std::size_t missing_predictions = 0;
    MatchParams match;
    std::string config_hash;
    std::optional<std::uint64_t> seed;
    nlohmann::json config = nlohmann::json::object();

    bool operator==(const RunReport&) const = default;
};

/// FNV-1a 64 of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

/// Scores a finished run. Retrieval metrics use prefixes of each trace's reranked_top_k; claims
/// with empty gold evidence are excluded from them but still count toward accuracy. Failed
/// traces count as missing predictions.
RunReport evaluate_run(const std::vector<PipelineTrace>& traces,
                       const std::vector<ClaimRecord>& dataset, const PassageStore& passages,
                       const std::vector<std::size_t>& ks, const MatchParams& params = {});

enum class ReportFormat { MARKDOWN, CSV, JSON };

ReportFormat report_format_from_string(std::string_view s);
std::string_view extension(ReportFormat f) noexcept;

/// Rate as percent with one decimal: 0.51 -> "51.0".
std::string percent(double rate);

nlohmann::json to_json(const RunReport& r);
RunReport report_from_json(const nlohmann::json& j);

std::string render_report(const RunReport& report, ReportFormat format);
void emit_report(const RunReport& report, ReportFormat format, const std::filesystem::path& path);

/// Wide retrieval table: one row per system; column groups Top@k (ascending) > retriever
/// (dense before tfidf) > RAcc, Recall. Reports sharing a system name fill the same row.
std::string render_retrieval_table(const std::vector<RunReport>& reports, ReportFormat format);

/// Long ablation table: per retriever, one row per (system, k) with RAcc and Recall columns.
/// Systems keep their order of first appearance; k ascends within a system.
std::string render_ablation_table(const std::vector<RunReport>& reports, ReportFormat format);

/// Display name of a retriever column ("Dense", "TFIDF").
std::string retriever_column_name(std::string_view retriever);

}  // namespace factcheck
