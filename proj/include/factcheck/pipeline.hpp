#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "factcheck/corpus.hpp"
#include "factcheck/error.hpp"
#include "factcheck/llm.hpp"
#include "factcheck/retrieval.hpp"
#include "factcheck/types.hpp"

namespace factcheck {

/// A stage of one claim's run failed; `stage()` names it.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct SubClaim {
    int index = 0;
    std::string segment_text;
    std::string decontextualized_text;
    /// edits[r] is the rewrite produced from evidence_by_round[r].
    std::vector<std::string> edits;
    std::vector<std::vector<EvidenceHit>> evidence_by_round;

    /// Latest formulation: last edit, or the decontextualized text when never edited.
    const std::string& current_text() const {
        return edits.empty() ? decontextualized_text : edits.back();
    }
};

enum class PipelineMode { SUCEA, RALM };

std::string_view to_string(PipelineMode mode) noexcept;
PipelineMode pipeline_mode_from_string(std::string_view s);

struct Ablations {
    bool no_segmentation = false;
    bool paraphrase_without_evidence = false;
};

struct PipelineConfig {
    RetrieverKind retriever = RetrieverKind::TFIDF;
    /// Final evidence budget after reranking.
    std::size_t k = 10;
    /// Per-sub-claim retrieval depth; defaults to k.
    std::optional<std::size_t> retrieval_k;
    int edit_rounds = 1;
    PipelineMode mode = PipelineMode::SUCEA;
    Ablations ablations;
    std::size_t max_subclaims = 8;
    /// Pool every round's hits for reranking; false pools only the final round.
    bool pool_all_rounds = true;
    LlmParams llm;

    std::size_t retrieval_depth() const { return retrieval_k.value_or(k); }

    /// Throws ConfigError on inconsistent settings.
    void validate() const;
    /// RALM forces edit_rounds = 0 and no segmentation.
    PipelineConfig effective() const;
};

inline constexpr std::string_view kNoEvidenceBlock = "(no evidence provided)";
inline constexpr std::string_view kNoRetrievedEvidenceBlock = "(no evidence retrieved)";
inline constexpr std::string_view kEmptyVerdictEvidence = "(none)";

// --- parsing of stage outputs (pure) -----------------------------------------------------------

/// Splits on '|' (or newlines when no '|' is present), trims, drops empties, merges the tail
/// beyond `max_segments`. Returns {claim} when the completion yields fewer than two pieces.
std::vector<std::string> parse_segments(std::string_view completion, std::string_view claim,
                                        std::size_t max_segments,
                                        std::vector<std::string>* warnings = nullptr);

/// One sentence per input segment; missing entries are padded with the original segment and
/// extras are dropped, each with a warning.
std::vector<std::string> parse_decontextualized(std::string_view completion,
                                                const std::vector<std::string>& segments,
                                                std::vector<std::string>* warnings = nullptr);

/// Strips surrounding whitespace, code fences, an "Expected result:" label and wrapping
/// quotes or angle brackets. Falls back to `original` when nothing is left.
std::string parse_edit(std::string_view completion, std::string_view original,
                       std::vector<std::string>* warnings = nullptr);

/// 0-based indices referenced by "[i] > [j] > ..." output, in order, deduplicated; identifiers
/// outside [1, passage_count] are ignored.
std::vector<std::size_t> parse_ranking(std::string_view completion, std::size_t passage_count);

/// Last label mention, preferring a line that starts with "final rating:". nullopt when none.
std::optional<VerdictLabel> parse_verdict(std::string_view completion);

// --- stages ------------------------------------------------------------------------------------

std::vector<std::string> segment_claim(std::string_view claim, LlmClient& llm,
                                       std::size_t max_subclaims,
                                       std::vector<std::string>* warnings = nullptr);

std::vector<std::string> decontextualize(const std::vector<std::string>& segments,
                                         std::string_view claim, LlmClient& llm,
                                         std::vector<std::string>* warnings = nullptr);

/// "<id>: <text>" lines.
std::string format_knowledge(const std::vector<Passage>& evidence);

/// Rewrites a sub-claim grounded in `evidence`. With use_evidence=false the knowledge block is
/// kNoEvidenceBlock. Requires non-empty evidence when use_evidence is set.
std::string edit_subclaim(std::string_view subclaim, const std::vector<Passage>& evidence,
                          LlmClient& llm, bool use_evidence, const Attribution& who = {"edit"},
                          std::vector<std::string>* warnings = nullptr);

/// Round 0 retrieves for the decontextualized text; each later round edits with the previous
/// round's evidence and retrieves again.
void iterate_retrieve_edit(SubClaim& subclaim, const PipelineConfig& config,
                           const Retriever& retriever, const PassageStore& passages,
                           LlmClient& llm, std::vector<std::string>* warnings = nullptr);

/// Union of sub-claim hits, one per passage id (max score), ordered by score then id.
std::vector<EvidenceHit> pool_evidence(const std::vector<SubClaim>& sub_claims, bool all_rounds);

struct Aggregation {
    std::vector<EvidenceHit> pool;
    std::vector<std::string> top_ids;
    bool used_fallback = false;
};

/// Listwise LLM rerank of the pooled evidence against the original claim.
Aggregation aggregate_evidence(std::string_view claim, const std::vector<SubClaim>& sub_claims,
                               std::size_t k, const PassageStore& passages, LlmClient& llm,
                               bool pool_all_rounds = true,
                               std::vector<std::string>* warnings = nullptr);

std::pair<VerdictLabel, std::string> predict_label(std::string_view claim,
                                                   const std::vector<std::string>& evidence_ids,
                                                   const PassageStore& passages, LlmClient& llm,
                                                   std::vector<std::string>* warnings = nullptr);

// --- per-claim run -----------------------------------------------------------------------------

struct PipelineTrace {
    std::string claim_id;
    std::string claim;
    PipelineMode mode = PipelineMode::SUCEA;
    std::vector<SubClaim> sub_claims;
    std::vector<EvidenceHit> pooled_evidence;
    std::vector<std::string> reranked_top_k;
    VerdictLabel predicted_label = VerdictLabel::NotEnoughInfo;
    std::string label_rationale;
    std::vector<LlmExchange> exchanges;
    std::vector<std::string> warnings;
    bool ok = true;
    std::string failed_stage;
    std::string error;
    std::map<std::string, std::int64_t> timings_ms;
};

nlohmann::json to_json(const EvidenceHit& h);
EvidenceHit hit_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PipelineTrace& t);
PipelineTrace trace_from_json(const nlohmann::json& j);

/// Copy with every wall-clock field (latency_ms, timings_ms) removed.
nlohmann::json strip_timings(nlohmann::json j);

struct PipelineContext {
    const Retriever& retriever;
    const PassageStore& passages;
    LlmProvider& llm;
};

/// Never throws for stage failures: the trace is marked failed with the stage named.
PipelineTrace run_claim(const ClaimRecord& record, const PipelineConfig& config,
                        const PipelineContext& ctx);

struct RunSummary {
    std::size_t ok = 0;
    std::size_t failed = 0;
    std::size_t parse_warnings = 0;
    std::filesystem::path trace_dir;
    std::filesystem::path manifest;
};

/// Runs every record with `workers` threads, writes one trace per claim under
/// `output_dir/traces/` and a JSONL manifest of (claim_id, status, label) in input order.
RunSummary run_dataset(const std::vector<ClaimRecord>& records, const PipelineConfig& config,
                       const PipelineContext& ctx, const std::filesystem::path& output_dir,
                       std::size_t workers = 1);

/// File name used for a claim's trace ("<slug>.json").
std::string trace_file_name(std::string_view claim_id);

std::vector<PipelineTrace> load_traces(const std::filesystem::path& run_dir);

}  // namespace factcheck
