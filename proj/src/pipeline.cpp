#include "factcheck/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "factcheck/error.hpp"
#include "factcheck/text.hpp"

namespace factcheck {

using nlohmann::json;

std::string_view to_string(PipelineMode mode) noexcept {
    return mode == PipelineMode::SUCEA ? "sucea" : "ralm";
}

PipelineMode pipeline_mode_from_string(std::string_view s) {
    if (s == "sucea" || s == "SUCEA") return PipelineMode::SUCEA;
    if (s == "ralm" || s == "RALM") return PipelineMode::RALM;
    throw ConfigError("unknown mode '" + std::string(s) + "' (expected sucea or ralm)");
}

void PipelineConfig::validate() const {
    if (k == 0) throw ConfigError("k must be >= 1");
    if (retrieval_k && *retrieval_k == 0) throw ConfigError("retrieval_k must be >= 1");
    if (edit_rounds < 0) throw ConfigError("edit_rounds must be >= 0");
    if (max_subclaims == 0) throw ConfigError("max_subclaims must be >= 1");
    if (ablations.paraphrase_without_evidence && edit_rounds == 0) {
        throw ConfigError("paraphrase_without_evidence needs edit_rounds >= 1");
    }
    if (mode == PipelineMode::RALM && ablations.paraphrase_without_evidence) {
        throw ConfigError("paraphrase_without_evidence does not apply to ralm mode");
    }
}

PipelineConfig PipelineConfig::effective() const {
    PipelineConfig c = *this;
    if (c.mode == PipelineMode::RALM) {
        c.edit_rounds = 0;
        c.ablations.no_segmentation = true;
    }
    return c;
}

// ---------------------------------------------------------------------------

namespace {

void warn(std::vector<std::string>* warnings, std::string msg) {
    if (warnings) warnings->push_back(std::move(msg));
}

bool istarts_with(std::string_view s, std::string_view prefix) {
    if (s.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
    }
    return true;
}

std::string strip_label(std::string s, std::string_view lowercase_label) {
    if (istarts_with(s, lowercase_label)) return trim(std::string_view(s).substr(lowercase_label.size()));
    return s;
}

std::vector<std::string> split_pieces(std::string_view text) {
    const char sep = text.find('|') != std::string_view::npos ? '|' : '\n';
    std::vector<std::string> pieces;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find(sep, start);
        if (end == std::string_view::npos) end = text.size();
        auto piece = trim(text.substr(start, end - start));
        if (!piece.empty()) pieces.push_back(std::move(piece));
        start = end + 1;
    }
    return pieces;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<Passage> resolve(const std::vector<EvidenceHit>& hits, const PassageStore& passages) {
    std::vector<Passage> out;
    out.reserve(hits.size());
    for (const auto& h : hits) out.push_back(passages.get_passage(h.passage_id));
    return out;
}

std::string edit_with_knowledge(std::string_view subclaim, std::string knowledge, LlmClient& llm,
                                const Attribution& who, std::vector<std::string>* warnings) {
    Bindings b{{"query", std::string(subclaim)}, {"kn", std::move(knowledge)}};
    auto raw = llm.complete(TemplateName::EDIT, b, who);
    return parse_edit(raw, subclaim, warnings);
}

}  // namespace

std::vector<std::string> parse_segments(std::string_view completion, std::string_view claim,
                                        std::size_t max_segments,
                                        std::vector<std::string>* warnings) {
    auto text = strip_label(trim(completion), "split:");
    auto pieces = split_pieces(text);
    if (pieces.empty()) {
        warn(warnings, "segmentation output empty; using the whole claim");
        return {std::string(claim)};
    }
    if (pieces.size() < 2) return {std::string(claim)};
    max_segments = std::max<std::size_t>(1, max_segments);
    if (pieces.size() > max_segments) {
        warn(warnings, "segmentation produced " + std::to_string(pieces.size()) +
                           " segments; merged tail into " + std::to_string(max_segments));
        std::vector<std::string> tail(pieces.begin() + static_cast<std::ptrdiff_t>(max_segments - 1),
                                      pieces.end());
        pieces.resize(max_segments - 1);
        pieces.push_back(join(tail, " "));
    }
    return pieces;
}

std::vector<std::string> parse_decontextualized(std::string_view completion,
                                                const std::vector<std::string>& segments,
                                                std::vector<std::string>* warnings) {
    auto text = strip_label(trim(completion), "<response>");
    auto pieces = split_pieces(text);
    if (pieces.size() < segments.size()) {
        warn(warnings, "decontextualization returned " + std::to_string(pieces.size()) +
                           " sentences for " + std::to_string(segments.size()) +
                           " segments; padded with original segments");
        for (std::size_t i = pieces.size(); i < segments.size(); ++i) pieces.push_back(segments[i]);
    } else if (pieces.size() > segments.size()) {
        warn(warnings, "decontextualization returned " + std::to_string(pieces.size()) +
                           " sentences for " + std::to_string(segments.size()) +
                           " segments; extras dropped");
        pieces.resize(segments.size());
    }
    return pieces;
}

std::string parse_edit(std::string_view completion, std::string_view original,
                       std::vector<std::string>* warnings) {
    auto s = trim(completion);
    if (s.rfind("```", 0) == 0) {
        auto nl = s.find('\n');
        s = nl == std::string::npos ? std::string{} : s.substr(nl + 1);
        if (auto fence = s.rfind("```"); fence != std::string::npos) s.erase(fence);
        s = trim(s);
    }
    s = strip_label(s, "expected result:");
    for (;;) {
        if (s.size() < 2) break;
        char open = s.front(), close = s.back();
        bool pair = (open == '"' && close == '"') || (open == '\'' && close == '\'') ||
                    (open == '`' && close == '`') || (open == '<' && close == '>');
        if (!pair) break;
        auto inner = std::string_view(s).substr(1, s.size() - 2);
        if (inner.find(open) != std::string_view::npos || inner.find(close) != std::string_view::npos) {
            break;
        }
        s = trim(inner);
    }
    if (s.empty()) {
        warn(warnings, "empty edit; keeping sub-claim unchanged");
        return std::string(original);
    }
    return s;
}

std::vector<std::size_t> parse_ranking(std::string_view completion, std::size_t passage_count) {
    std::vector<std::size_t> out;
    std::vector<bool> seen(passage_count, false);
    std::size_t i = 0;
    while (i < completion.size()) {
        if (completion[i] != '[') {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        std::size_t value = 0;
        bool digits = false;
        while (j < completion.size() && std::isdigit(static_cast<unsigned char>(completion[j]))) {
            if (value < 1'000'000) value = value * 10 + static_cast<std::size_t>(completion[j] - '0');
            digits = true;
            ++j;
        }
        if (digits && j < completion.size() && completion[j] == ']' && value >= 1 &&
            value <= passage_count && !seen[value - 1]) {
            seen[value - 1] = true;
            out.push_back(value - 1);
        }
        i = j;
    }
    return out;
}

std::optional<VerdictLabel> parse_verdict(std::string_view completion) {
    std::string lower(completion);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    auto last_mention = [](std::string_view text) -> std::optional<VerdictLabel> {
        static const std::pair<std::string_view, VerdictLabel> kWords[] = {
            {"not enough information", VerdictLabel::NotEnoughInfo},
            {"supported", VerdictLabel::Supported},
            {"refuted", VerdictLabel::Refuted}};
        std::optional<VerdictLabel> best;
        std::size_t best_pos = 0;
        for (const auto& [word, label] : kWords) {
            auto pos = text.rfind(word);
            if (pos != std::string_view::npos && (!best || pos > best_pos)) {
                best = label;
                best_pos = pos;
            }
        }
        return best;
    };

    std::optional<std::string> rating_line;
    std::size_t start = 0;
    while (start <= lower.size()) {
        auto end = lower.find('\n', start);
        if (end == std::string::npos) end = lower.size();
        auto line = trim(std::string_view(lower).substr(start, end - start));
        if (line.rfind("final rating:", 0) == 0) rating_line = line;
        start = end + 1;
    }
    if (rating_line) {
        if (auto label = last_mention(*rating_line)) return label;
    }
    return last_mention(lower);
}

// ---------------------------------------------------------------------------

std::vector<std::string> segment_claim(std::string_view claim, LlmClient& llm,
                                       std::size_t max_subclaims,
                                       std::vector<std::string>* warnings) {
    if (trim(claim).empty()) throw Error("cannot segment an empty claim");
    auto raw = llm.complete(TemplateName::SEGMENT, {{"sen", std::string(claim)}}, {"segment"});
    return parse_segments(raw, claim, max_subclaims, warnings);
}

std::vector<std::string> decontextualize(const std::vector<std::string>& segments,
                                         std::string_view /*claim*/, LlmClient& llm,
                                         std::vector<std::string>* warnings) {
    if (segments.empty()) throw Error("decontextualize needs at least one segment");
    auto raw = llm.complete(TemplateName::DECONTEXT, {{"sen", join(segments, " | ")}},
                            {"decontextualize"});
    return parse_decontextualized(raw, segments, warnings);
}

std::string format_knowledge(const std::vector<Passage>& evidence) {
    std::string out;
    for (std::size_t i = 0; i < evidence.size(); ++i) {
        if (i) out.push_back('\n');
        out += evidence[i].id + ": " + evidence[i].text;
    }
    return out;
}

std::string edit_subclaim(std::string_view subclaim, const std::vector<Passage>& evidence,
                          LlmClient& llm, bool use_evidence, const Attribution& who,
                          std::vector<std::string>* warnings) {
    if (use_evidence && evidence.empty()) {
        throw Error("evidence-grounded editing needs at least one passage");
    }
    auto kn = use_evidence ? format_knowledge(evidence) : std::string(kNoEvidenceBlock);
    return edit_with_knowledge(subclaim, std::move(kn), llm, who, warnings);
}

void iterate_retrieve_edit(SubClaim& sc, const PipelineConfig& config, const Retriever& retriever,
                           const PassageStore& passages, LlmClient& llm,
                           std::vector<std::string>* warnings) {
    if (config.edit_rounds < 0) throw Error("edit_rounds must be >= 0");
    const auto depth = config.retrieval_depth();
    auto retrieve = [&](const std::string& query, int round) {
        try {
            auto hits = retriever.retrieve(query, depth);
            for (auto& h : hits) {
                h.subclaim_index = sc.index;
                h.round = round;
            }
            sc.evidence_by_round.push_back(std::move(hits));
        } catch (const std::exception& e) {
            throw StageError("retrieve", e.what());
        }
    };

    sc.edits.clear();
    sc.evidence_by_round.clear();
    retrieve(sc.decontextualized_text, 0);
    const bool use_evidence = !config.ablations.paraphrase_without_evidence;
    for (int round = 1; round <= config.edit_rounds; ++round) {
        std::string edited;
        try {
            Attribution who{"edit", sc.index, round};
            const auto& prev = sc.evidence_by_round[static_cast<std::size_t>(round - 1)];
            if (use_evidence && prev.empty()) {
                warn(warnings, "sub-claim " + std::to_string(sc.index) + " round " +
                                   std::to_string(round) + ": no evidence to ground the edit");
                edited = edit_with_knowledge(sc.current_text(), std::string(kNoRetrievedEvidenceBlock),
                                             llm, who, warnings);
            } else {
                edited = edit_subclaim(sc.current_text(), use_evidence ? resolve(prev, passages)
                                                                       : std::vector<Passage>{},
                                       llm, use_evidence, who, warnings);
            }
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError("edit", e.what());
        }
        sc.edits.push_back(edited);
        retrieve(edited, round);
    }
}

std::vector<EvidenceHit> pool_evidence(const std::vector<SubClaim>& sub_claims, bool all_rounds) {
    std::unordered_map<std::string, std::size_t> index;
    std::vector<EvidenceHit> pool;
    auto add = [&](const EvidenceHit& h) {
        auto [it, inserted] = index.emplace(h.passage_id, pool.size());
        if (inserted) {
            pool.push_back(h);
        } else if (h.score > pool[it->second].score) {
            pool[it->second] = h;
        }
    };
    for (const auto& sc : sub_claims) {
        if (sc.evidence_by_round.empty()) continue;
        if (all_rounds) {
            for (const auto& round : sc.evidence_by_round) {
                for (const auto& h : round) add(h);
            }
        } else {
            for (const auto& h : sc.evidence_by_round.back()) add(h);
        }
    }
    std::sort(pool.begin(), pool.end(), [](const EvidenceHit& a, const EvidenceHit& b) {
        return ranks_before(a.score, a.passage_id, b.score, b.passage_id);
    });
    return pool;
}

Aggregation aggregate_evidence(std::string_view claim, const std::vector<SubClaim>& sub_claims,
                               std::size_t k, const PassageStore& passages, LlmClient& llm,
                               bool pool_all_rounds, std::vector<std::string>* warnings) {
    Aggregation agg;
    agg.pool = pool_evidence(sub_claims, pool_all_rounds);
    if (agg.pool.empty()) {
        warn(warnings, "evidence pool is empty; skipping rerank");
        return agg;
    }

    std::string listing;
    for (std::size_t i = 0; i < agg.pool.size(); ++i) {
        if (i) listing.push_back('\n');
        listing += "[" + std::to_string(i + 1) + "] " + passages.get_passage(agg.pool[i].passage_id).text;
    }
    const auto budget = std::min(k, agg.pool.size());
    Bindings b{{"num_passages", std::to_string(agg.pool.size())},
               {"query", std::string(claim)},
               {"passages", std::move(listing)},
               {"top_k", std::to_string(budget)}};
    auto raw = llm.complete(TemplateName::RERANK, b, {"rerank"});

    auto order = parse_ranking(raw, agg.pool.size());
    if (order.empty()) {
        warn(warnings, "unparseable rerank output; using retrieval-score order");
        agg.used_fallback = true;
        for (std::size_t i = 0; i < budget; ++i) agg.top_ids.push_back(agg.pool[i].passage_id);
        return agg;
    }
    for (std::size_t i = 0; i < order.size() && agg.top_ids.size() < k; ++i) {
        agg.top_ids.push_back(agg.pool[order[i]].passage_id);
    }
    return agg;
}

std::pair<VerdictLabel, std::string> predict_label(std::string_view claim,
                                                   const std::vector<std::string>& evidence_ids,
                                                   const PassageStore& passages, LlmClient& llm,
                                                   std::vector<std::string>* warnings) {
    std::vector<std::string> texts;
    for (const auto& id : evidence_ids) texts.push_back(passages.get_passage(id).text);
    Bindings b{{"claim", std::string(claim)},
               {"evidence", texts.empty() ? std::string(kEmptyVerdictEvidence) : join(texts, "\n")}};
    auto raw = llm.complete(TemplateName::ENTAIL, b, {"entail"});
    auto label = parse_verdict(raw);
    if (!label) {
        warn(warnings, "no verdict found in entailment output; defaulting to not_enough_info");
        return {VerdictLabel::NotEnoughInfo, raw};
    }
    return {*label, raw};
}

// ---------------------------------------------------------------------------

PipelineTrace run_claim(const ClaimRecord& record, const PipelineConfig& config_in,
                        const PipelineContext& ctx) {
    PipelineTrace trace;
    trace.claim_id = record.claim_id;
    trace.claim = record.claim;
    trace.mode = config_in.mode;

    const auto config = config_in.effective();
    LlmClient llm(ctx.llm, config.llm, trace.exchanges);
    auto* warnings = &trace.warnings;
    std::string stage;

    auto timed = [&](const std::string& name, auto&& fn) {
        stage = name;
        auto start = std::chrono::steady_clock::now();
        fn();
        trace.timings_ms[name] += std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::steady_clock::now() - start)
                                      .count();
    };

    try {
        config.validate();
        if (config.mode == PipelineMode::RALM) {
            SubClaim sc;
            sc.segment_text = sc.decontextualized_text = record.claim;
            timed("retrieve", [&] {
                auto hits = ctx.retriever.retrieve(record.claim, config.k);
                for (auto& h : hits) {
                    h.subclaim_index = 0;
                    h.round = 0;
                }
                sc.evidence_by_round.push_back(std::move(hits));
            });
            trace.sub_claims.push_back(std::move(sc));
            trace.pooled_evidence = trace.sub_claims.front().evidence_by_round.front();
            for (const auto& h : trace.pooled_evidence) trace.reranked_top_k.push_back(h.passage_id);
        } else {
            std::vector<std::string> segments{record.claim};
            std::vector<std::string> standalone{record.claim};
            if (!config.ablations.no_segmentation) {
                timed("segment", [&] {
                    segments = segment_claim(record.claim, llm, config.max_subclaims, warnings);
                });
                timed("decontextualize",
                      [&] { standalone = decontextualize(segments, record.claim, llm, warnings); });
            }
            for (std::size_t i = 0; i < segments.size(); ++i) {
                SubClaim sc;
                sc.index = static_cast<int>(i);
                sc.segment_text = segments[i];
                sc.decontextualized_text = standalone[i];
                trace.sub_claims.push_back(std::move(sc));
            }
            timed("retrieve_edit", [&] {
                for (auto& sc : trace.sub_claims) {
                    try {
                        iterate_retrieve_edit(sc, config, ctx.retriever, ctx.passages, llm, warnings);
                    } catch (const StageError& e) {
                        stage = e.stage();
                        throw;
                    }
                }
            });
            timed("rerank", [&] {
                auto agg = aggregate_evidence(record.claim, trace.sub_claims, config.k, ctx.passages,
                                              llm, config.pool_all_rounds, warnings);
                trace.pooled_evidence = std::move(agg.pool);
                trace.reranked_top_k = std::move(agg.top_ids);
            });
        }
        timed("entail", [&] {
            auto [label, rationale] =
                predict_label(record.claim, trace.reranked_top_k, ctx.passages, llm, warnings);
            trace.predicted_label = label;
            trace.label_rationale = std::move(rationale);
        });
    } catch (const std::exception& e) {
        trace.ok = false;
        trace.failed_stage = stage.empty() ? "config" : stage;
        trace.error = e.what();
    }
    return trace;
}

// ---------------------------------------------------------------------------

json to_json(const EvidenceHit& h) {
    return json{{"passage_id", h.passage_id},
                {"score", h.score},
                {"retriever", to_string(h.retriever)},
                {"query_text", h.query_text},
                {"subclaim_index", h.subclaim_index ? json(*h.subclaim_index) : json(nullptr)},
                {"round", h.round ? json(*h.round) : json(nullptr)}};
}

EvidenceHit hit_from_json(const json& j) {
    EvidenceHit h;
    h.passage_id = j.at("passage_id").get<std::string>();
    h.score = j.at("score").get<double>();
    h.retriever = retriever_kind_from_string(j.at("retriever").get<std::string>());
    h.query_text = j.value("query_text", std::string{});
    if (!j.value("subclaim_index", json()).is_null()) h.subclaim_index = j["subclaim_index"].get<int>();
    if (!j.value("round", json()).is_null()) h.round = j["round"].get<int>();
    return h;
}

json to_json(const PipelineTrace& t) {
    json subs = json::array();
    for (const auto& sc : t.sub_claims) {
        json rounds = json::array();
        for (const auto& r : sc.evidence_by_round) {
            json hits = json::array();
            for (const auto& h : r) hits.push_back(to_json(h));
            rounds.push_back(std::move(hits));
        }
        subs.push_back({{"index", sc.index},
                        {"segment_text", sc.segment_text},
                        {"decontextualized_text", sc.decontextualized_text},
                        {"edits", sc.edits},
                        {"evidence_by_round", std::move(rounds)}});
    }
    json pooled = json::array();
    for (const auto& h : t.pooled_evidence) pooled.push_back(to_json(h));
    json exchanges = json::array();
    for (const auto& e : t.exchanges) exchanges.push_back(to_json(e));

    return json{{"claim_id", t.claim_id},
                {"claim", t.claim},
                {"mode", to_string(t.mode)},
                {"status", t.ok ? "ok" : "failed"},
                {"failed_stage", t.failed_stage},
                {"error", t.error},
                {"sub_claims", std::move(subs)},
                {"pooled_evidence", std::move(pooled)},
                {"reranked_top_k", t.reranked_top_k},
                {"predicted_label", to_string(t.predicted_label)},
                {"label_rationale", t.label_rationale},
                {"exchanges", std::move(exchanges)},
                {"warnings", t.warnings},
                {"timings_ms", t.timings_ms}};
}

PipelineTrace trace_from_json(const json& j) {
    PipelineTrace t;
    t.claim_id = j.at("claim_id").get<std::string>();
    t.claim = j.at("claim").get<std::string>();
    t.mode = pipeline_mode_from_string(j.at("mode").get<std::string>());
    t.ok = j.at("status").get<std::string>() == "ok";
    t.failed_stage = j.value("failed_stage", std::string{});
    t.error = j.value("error", std::string{});
    for (const auto& s : j.at("sub_claims")) {
        SubClaim sc;
        sc.index = s.at("index").get<int>();
        sc.segment_text = s.at("segment_text").get<std::string>();
        sc.decontextualized_text = s.at("decontextualized_text").get<std::string>();
        sc.edits = s.at("edits").get<std::vector<std::string>>();
        for (const auto& r : s.at("evidence_by_round")) {
            std::vector<EvidenceHit> hits;
            for (const auto& h : r) hits.push_back(hit_from_json(h));
            sc.evidence_by_round.push_back(std::move(hits));
        }
        t.sub_claims.push_back(std::move(sc));
    }
    for (const auto& h : j.at("pooled_evidence")) t.pooled_evidence.push_back(hit_from_json(h));
    t.reranked_top_k = j.at("reranked_top_k").get<std::vector<std::string>>();
    t.predicted_label = verdict_from_string(j.at("predicted_label").get<std::string>());
    t.label_rationale = j.value("label_rationale", std::string{});
    for (const auto& e : j.at("exchanges")) t.exchanges.push_back(exchange_from_json(e));
    t.warnings = j.value("warnings", std::vector<std::string>{});
    t.timings_ms = j.value("timings_ms", std::map<std::string, std::int64_t>{});
    return t;
}

json strip_timings(json j) {
    if (j.is_object()) {
        j.erase("latency_ms");
        j.erase("timings_ms");
        for (auto& [key, value] : j.items()) value = strip_timings(std::move(value));
    } else if (j.is_array()) {
        for (auto& v : j) v = strip_timings(std::move(v));
    }
    return j;
}

std::string trace_file_name(std::string_view claim_id) { return page_slug(claim_id) + ".json"; }

RunSummary run_dataset(const std::vector<ClaimRecord>& records, const PipelineConfig& config,
                       const PipelineContext& ctx, const std::filesystem::path& output_dir,
                       std::size_t workers) {
    config.validate();
    RunSummary summary;
    summary.trace_dir = output_dir / "traces";
    summary.manifest = output_dir / "manifest.jsonl";
    std::filesystem::create_directories(summary.trace_dir);

    std::vector<json> manifest_rows(records.size());
    std::vector<std::size_t> warning_counts(records.size(), 0);
    std::vector<char> oks(records.size(), 0);
    std::atomic<std::size_t> next{0};
    std::mutex io_mu;
    std::exception_ptr io_error;

    auto work = [&] {
        for (;;) {
            auto i = next.fetch_add(1);
            if (i >= records.size()) return;
            auto trace = run_claim(records[i], config, ctx);
            oks[i] = trace.ok;
            warning_counts[i] = trace.warnings.size();
            manifest_rows[i] = json{{"claim_id", trace.claim_id},
                                    {"status", trace.ok ? "ok" : "failed"},
                                    {"label", to_string(trace.predicted_label)},
                                    {"warnings", trace.warnings.size()}};
            std::ofstream out(summary.trace_dir / trace_file_name(trace.claim_id), std::ios::trunc);
            out << to_json(trace).dump(2) << '\n';
            if (!out) {
                std::lock_guard lock(io_mu);
                if (!io_error) {
                    io_error = std::make_exception_ptr(Error("cannot write trace for " + trace.claim_id));
                }
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < std::max<std::size_t>(1, workers); ++w) pool.emplace_back(work);
        work();
    }
    if (io_error) std::rethrow_exception(io_error);

    std::ofstream manifest(summary.manifest, std::ios::trunc);
    for (std::size_t i = 0; i < records.size(); ++i) {
        manifest << manifest_rows[i].dump() << '\n';
        (oks[i] ? summary.ok : summary.failed)++;
        summary.parse_warnings += warning_counts[i];
    }
    return summary;
}

std::vector<PipelineTrace> load_traces(const std::filesystem::path& run_dir) {
    std::ifstream manifest(run_dir / "manifest.jsonl");
    if (!manifest) throw NotFoundError("no manifest.jsonl in " + run_dir.string());
    std::vector<PipelineTrace> traces;
    std::string line;
    while (std::getline(manifest, line)) {
        if (trim(line).empty()) continue;
        auto id = json::parse(line).at("claim_id").get<std::string>();
        std::ifstream in(run_dir / "traces" / trace_file_name(id));
        if (!in) throw NotFoundError("missing trace for claim " + id);
        traces.push_back(trace_from_json(json::parse(in)));
    }
    return traces;
}

}  // namespace factcheck
