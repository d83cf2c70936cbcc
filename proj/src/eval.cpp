#include "factcheck/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "factcheck/error.hpp"
#include "factcheck/text.hpp"

namespace factcheck {

using nlohmann::json;

namespace {

std::unordered_set<std::string> token_set(std::string_view normalized) {
    std::unordered_set<std::string> out;
    for (auto w : split_words(normalized)) out.emplace(w);
    return out;
}

}  // namespace

double token_jaccard(std::string_view a, std::string_view b) {
    auto sa = token_set(normalize_for_match(a));
    auto sb = token_set(normalize_for_match(b));
    if (sa.empty() && sb.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    return static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
}

bool match_passage_to_gold(const Passage& passage, const GoldEvidenceRef& gold,
                           const MatchParams& params) {
    if (gold.passage_id && *gold.passage_id == passage.id) return true;
    if (!gold.sentence) return false;
    if (normalize_for_match(gold.page_title) != normalize_for_match(passage.page_title)) return false;
    auto sentence = normalize_for_match(*gold.sentence);
    if (sentence.empty()) return false;
    if (normalize_for_match(passage.text).find(sentence) != std::string::npos) return true;
    return token_jaccard(*gold.sentence, passage.text) >= params.jaccard_threshold;
}

RetrievalJudgment judge_retrieval(const std::string& claim_id, const std::vector<Passage>& retrieved,
                                  const std::vector<GoldEvidenceRef>& gold, std::size_t k,
                                  const MatchParams& params) {
    RetrievalJudgment j;
    j.claim_id = claim_id;
    j.gold_count = gold.size();
    j.k = k;
    auto n = std::min(k, retrieved.size());
    for (std::size_t g = 0; g < gold.size(); ++g) {
        for (std::size_t i = 0; i < n; ++i) {
            if (match_passage_to_gold(retrieved[i], gold[g], params)) {
                j.matched_gold.insert(g);
                break;
            }
        }
    }
    j.hit = !j.matched_gold.empty();
    return j;
}

double retrieval_accuracy(const std::vector<RetrievalJudgment>& judgments) {
    if (judgments.empty()) throw Error("retrieval_accuracy: no judgments");
    std::size_t hits = 0;
    for (const auto& j : judgments) hits += j.hit ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(judgments.size());
}

double recall_at_k(const std::vector<RetrievalJudgment>& judgments) {
    if (judgments.empty()) throw Error("recall_at_k: no judgments");
    double sum = 0.0;
    for (const auto& j : judgments) {
        if (j.gold_count == 0) throw Error("recall_at_k: claim " + j.claim_id + " has no gold evidence");
        sum += static_cast<double>(j.matched_gold.size()) / static_cast<double>(j.gold_count);
    }
    return sum / static_cast<double>(judgments.size());
}

FactAccuracy fact_accuracy(const std::map<std::string, VerdictLabel>& predictions,
                           const std::vector<ClaimRecord>& gold) {
    FactAccuracy out;
    for (auto l : kAllVerdicts) out.per_label[l] = {};
    std::size_t correct = 0;
    for (const auto& rec : gold) {
        auto& b = out.per_label[rec.gold_label];
        ++b.total;
        auto it = predictions.find(rec.claim_id);
        if (it == predictions.end()) {
            ++out.missing;
            continue;
        }
        if (it->second == rec.gold_label) {
            ++b.correct;
            ++correct;
        }
    }
    out.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
    return out;
}

std::string config_hash(const json& config) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RunReport evaluate_run(const std::vector<PipelineTrace>& traces,
                       const std::vector<ClaimRecord>& dataset, const PassageStore& passages,
                       const std::vector<std::size_t>& ks, const MatchParams& params) {
    if (ks.empty()) throw Error("evaluate_run: no k values");
    for (auto k : ks) {
        if (k == 0) throw Error("evaluate_run: k must be positive");
    }
    std::unordered_map<std::string, const PipelineTrace*> by_id;
    for (const auto& t : traces) by_id[t.claim_id] = &t;

    RunReport r;
    r.match = params;
    r.n_claims = dataset.size();

    std::map<std::string, VerdictLabel> predictions;
    for (const auto& rec : dataset) {
        auto it = by_id.find(rec.claim_id);
        if (it != by_id.end() && it->second->ok) predictions[rec.claim_id] = it->second->predicted_label;
    }
    auto fa = fact_accuracy(predictions, dataset);
    r.accuracy = fa.accuracy;
    r.per_label = fa.per_label;
    r.missing_predictions = fa.missing;

    std::map<std::size_t, std::vector<RetrievalJudgment>> judgments;
    for (const auto& rec : dataset) {
        if (rec.gold_evidence.empty()) {
            ++r.excluded_empty_gold;
            continue;
        }
        std::vector<Passage> retrieved;
        auto it = by_id.find(rec.claim_id);
        if (it != by_id.end()) {
            for (const auto& id : it->second->reranked_top_k) retrieved.push_back(passages.get_passage(id));
        }
        for (auto k : ks) {
            judgments[k].push_back(judge_retrieval(rec.claim_id, retrieved, rec.gold_evidence, k, params));
        }
    }
    for (auto& [k, js] : judgments) {
        r.racc_by_k[k] = retrieval_accuracy(js);
        r.recall_by_k[k] = recall_at_k(js);
    }
    return r;
}

ReportFormat report_format_from_string(std::string_view s) {
    if (s == "md" || s == "markdown") return ReportFormat::MARKDOWN;
    if (s == "csv") return ReportFormat::CSV;
    if (s == "json") return ReportFormat::JSON;
    throw ConfigError("unknown report format '" + std::string(s) + "' (expected md, csv or json)");
}

std::string_view extension(ReportFormat f) noexcept {
    switch (f) {
        case ReportFormat::MARKDOWN: return "md";
        case ReportFormat::CSV: return "csv";
        case ReportFormat::JSON: return "json";
    }
    return "md";
}

std::string percent(double rate) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", rate * 100.0);
    return buf;
}

// --- JSON --------------------------------------------------------------------------------------

json to_json(const RunReport& r) {
    auto by_k = [](const std::map<std::size_t, double>& m) {
        json a = json::array();
        for (const auto& [k, v] : m) a.push_back({{"k", k}, {"value", v}});
        return a;
    };
    json labels = json::object();
    for (const auto& [l, b] : r.per_label) {
        labels[std::string(to_string(l))] = {{"correct", b.correct}, {"total", b.total}};
    }
    return json{{"system", r.system},
                {"retriever", r.retriever},
                {"n_claims", r.n_claims},
                {"accuracy", r.accuracy},
                {"racc_by_k", by_k(r.racc_by_k)},
                {"recall_by_k", by_k(r.recall_by_k)},
                {"per_label", std::move(labels)},
                {"excluded_empty_gold", r.excluded_empty_gold},
                {"missing_predictions", r.missing_predictions},
                {"match", {{"jaccard_threshold", r.match.jaccard_threshold}}},
                {"config_hash", r.config_hash},
                {"seed", r.seed ? json(*r.seed) : json(nullptr)},
                {"config", r.config}};
}

RunReport report_from_json(const json& j) {
    try {
        RunReport r;
        r.system = j.at("system").get<std::string>();
        r.retriever = j.at("retriever").get<std::string>();
        r.n_claims = j.at("n_claims").get<std::size_t>();
        r.accuracy = j.at("accuracy").get<double>();
        for (const auto& e : j.at("racc_by_k")) r.racc_by_k[e.at("k").get<std::size_t>()] = e.at("value").get<double>();
        for (const auto& e : j.at("recall_by_k")) r.recall_by_k[e.at("k").get<std::size_t>()] = e.at("value").get<double>();
        for (const auto& [name, b] : j.at("per_label").items()) {
            r.per_label[verdict_from_string(name)] = {b.at("correct").get<std::size_t>(),
                                                      b.at("total").get<std::size_t>()};
        }
        r.excluded_empty_gold = j.at("excluded_empty_gold").get<std::size_t>();
        r.missing_predictions = j.at("missing_predictions").get<std::size_t>();
        r.match.jaccard_threshold = j.at("match").at("jaccard_threshold").get<double>();
        r.config_hash = j.at("config_hash").get<std::string>();
        if (!j.at("seed").is_null()) r.seed = j["seed"].get<std::uint64_t>();
        r.config = j.at("config");
        return r;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed report: ") + e.what());
    }
}

// --- tables ------------------------------------------------------------------------------------

namespace {

using Table = std::vector<std::vector<std::string>>;

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void write_table(std::ostream& os, const Table& t, ReportFormat f) {
    if (t.empty()) return;
    if (f == ReportFormat::CSV) {
        for (const auto& row : t) {
            for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << csv_cell(row[i]);
            os << "\n";
        }
        return;
    }
    auto line = [&](const std::vector<std::string>& row) {
        os << "|";
        for (const auto& c : row) os << " " << c << " |";
        os << "\n";
    };
    line(t[0]);
    os << "|";
    for (std::size_t i = 0; i < t[0].size(); ++i) os << (i ? " ---: |" : " --- |");
    os << "\n";
    for (std::size_t r = 1; r < t.size(); ++r) line(t[r]);
}

std::string cell(const std::map<std::size_t, double>& m, std::size_t k) {
    auto it = m.find(k);
    return it == m.end() ? "-" : percent(it->second);
}

std::string seed_text(const RunReport& r) { return r.seed ? std::to_string(*r.seed) : "none"; }

std::string match_text(const MatchParams& m) {
    char buf[128];
    std::snprintf(buf, sizeof buf,
                  "passage_id | same-page substring | same-page token Jaccard >= %.2f",
                  m.jaccard_threshold);
    return buf;
}

void write_header(std::ostream& os, const RunReport& r, ReportFormat f) {
    std::vector<std::pair<std::string, std::string>> rows{
        {"system", r.system},
        {"retriever", r.retriever},
        {"config_hash", r.config_hash},
        {"match", match_text(r.match)},
        {"claims", std::to_string(r.n_claims)},
        {"excluded_empty_gold", std::to_string(r.excluded_empty_gold)},
        {"missing_predictions", std::to_string(r.missing_predictions)},
        {"seed", seed_text(r)}};
    if (f == ReportFormat::CSV) {
        for (const auto& [k, v] : rows) os << "# " << k << ": " << v << "\n";
    } else {
        os << "# Run report\n\n";
        for (const auto& [k, v] : rows) os << "- " << k << ": " << v << "\n";
    }
    os << "\n";
}

std::set<std::size_t> all_ks(const RunReport& r) {
    std::set<std::size_t> ks;
    for (const auto& [k, v] : r.racc_by_k) ks.insert(k);
    for (const auto& [k, v] : r.recall_by_k) ks.insert(k);
    return ks;
}

}  // namespace

std::string render_report(const RunReport& r, ReportFormat format) {
    if (format == ReportFormat::JSON) return to_json(r).dump(2) + "\n";
    std::ostringstream os;
    write_header(os, r, format);

    auto ks = all_ks(r);
    Table summary{{"System", "Retriever", "Claims", "Accuracy"}};
    for (auto k : ks) {
        summary[0].push_back("Top@" + std::to_string(k) + " RAcc");
        summary[0].push_back("Top@" + std::to_string(k) + " Recall");
    }
    std::vector<std::string> row{r.system, retriever_column_name(r.retriever),
                                 std::to_string(r.n_claims), percent(r.accuracy)};
    for (auto k : ks) {
        row.push_back(cell(r.racc_by_k, k));
        row.push_back(cell(r.recall_by_k, k));
    }
    summary.push_back(std::move(row));
    write_table(os, summary, format);
    os << "\n";

    Table labels{{"Gold label", "Correct", "Total", "Accuracy"}};
    for (const auto& [l, b] : r.per_label) {
        labels.push_back({std::string(to_string(l)), std::to_string(b.correct),
                          std::to_string(b.total), percent(b.rate())});
    }
    write_table(os, labels, format);
    return os.str();
}

void emit_report(const RunReport& report, ReportFormat format, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write report " + path.string());
    out << render_report(report, format);
    out.flush();
    if (!out) throw Error("failed writing report " + path.string());
}

std::string retriever_column_name(std::string_view retriever) {
    if (retriever == "dense") return "Dense";
    if (retriever == "tfidf") return "TFIDF";
    return std::string(retriever);
}

std::string render_retrieval_table(const std::vector<RunReport>& reports, ReportFormat format) {
    if (format == ReportFormat::JSON) {
        json a = json::array();
        for (const auto& r : reports) a.push_back(to_json(r));
        return a.dump(2) + "\n";
    }
    std::set<std::size_t> ks;
    // Both standard retrievers always get columns so the table keeps one shape; absent runs show "-".
    std::vector<std::string> retrievers{"dense", "tfidf"};
    std::vector<std::string> systems;
    for (const auto& r : reports) {
        auto rk = all_ks(r);
        ks.insert(rk.begin(), rk.end());
        if (std::find(retrievers.begin(), retrievers.end(), r.retriever) == retrievers.end()) {
            retrievers.push_back(r.retriever);
        }
        if (std::find(systems.begin(), systems.end(), r.system) == systems.end()) {
            systems.push_back(r.system);
        }
    }
    // dense before tfidf, anything else after in name order
    auto order = [](const std::string& s) { return s == "dense" ? 0 : s == "tfidf" ? 1 : 2; };
    std::sort(retrievers.begin(), retrievers.end(), [&](const auto& a, const auto& b) {
        return order(a) != order(b) ? order(a) < order(b) : a < b;
    });

    Table t{{"System"}};
    for (auto k : ks) {
        for (const auto& rv : retrievers) {
            auto prefix = "Top@" + std::to_string(k) + " " + retriever_column_name(rv);
            t[0].push_back(prefix + " RAcc");
            t[0].push_back(prefix + " Recall");
        }
    }
    for (const auto& sys : systems) {
        std::vector<std::string> row{sys};
        for (auto k : ks) {
            for (const auto& rv : retrievers) {
                const RunReport* found = nullptr;
                for (const auto& r : reports) {
                    if (r.system == sys && r.retriever == rv) found = &r;
                }
                row.push_back(found ? cell(found->racc_by_k, k) : "-");
                row.push_back(found ? cell(found->recall_by_k, k) : "-");
            }
        }
        t.push_back(std::move(row));
    }
    std::ostringstream os;
    write_table(os, t, format);
    return os.str();
}

std::string render_ablation_table(const std::vector<RunReport>& reports, ReportFormat format) {
    if (format == ReportFormat::JSON) return render_retrieval_table(reports, format);
    std::vector<std::string> retrievers;
    for (const auto& r : reports) {
        if (std::find(retrievers.begin(), retrievers.end(), r.retriever) == retrievers.end()) {
            retrievers.push_back(r.retriever);
        }
    }
    auto order = [](const std::string& s) { return s == "dense" ? 0 : s == "tfidf" ? 1 : 2; };
    std::stable_sort(retrievers.begin(), retrievers.end(), [&](const auto& a, const auto& b) {
        return order(a) != order(b) ? order(a) < order(b) : a < b;
    });
    Table t{{"Retriever", "System", "Top@k", "RAcc", "Recall"}};
    for (const auto& rv : retrievers) {
        for (const auto& r : reports) {
            if (r.retriever != rv) continue;
            for (auto k : all_ks(r)) {
                t.push_back({retriever_column_name(rv), r.system, std::to_string(k),
                             cell(r.racc_by_k, k), cell(r.recall_by_k, k)});
            }
        }
    }
    std::ostringstream os;
    write_table(os, t, format);
    return os.str();
}

}  // namespace factcheck
