#include "factcheck/tfidf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

#include <nlohmann/json.hpp>

#include "binio.hpp"
#include "factcheck/error.hpp"

namespace factcheck {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(RetrieverKind kind) noexcept {
    return kind == RetrieverKind::TFIDF ? "tfidf" : "dense";
}

RetrieverKind retriever_kind_from_string(std::string_view s) {
    if (s == "tfidf" || s == "TFIDF") return RetrieverKind::TFIDF;
    if (s == "dense" || s == "DENSE" || s == "contriever") return RetrieverKind::DENSE;
    throw ConfigError("unknown retriever '" + std::string(s) + "' (expected tfidf or dense)");
}

namespace {

double log_tf(std::uint32_t tf) { return 1.0 + std::log(static_cast<double>(tf)); }

std::map<std::string, std::uint32_t> term_counts(const std::vector<std::string>& tokens) {
    std::map<std::string, std::uint32_t> counts;
    for (const auto& t : tokens) ++counts[t];
    return counts;
}

const std::vector<Posting> kNoPostings;

}  // namespace

InvertedIndex InvertedIndex::build(const PassageStore& passages, const IndexOptions& opts) {
    if (passages.size() == 0) throw Error("cannot build an index over an empty corpus");
    if (passages.size() > UINT32_MAX) throw Error("corpus too large for 32-bit ordinals");

    InvertedIndex index;
    index.opts_ = opts;
    index.ids_.reserve(passages.size());
    std::vector<std::vector<std::pair<std::string, std::uint32_t>>> doc_terms;

    for (std::size_t ord = 0; ord < passages.size(); ++ord) {
        auto p = passages.at(ord);
        auto text = opts.index_title ? p.page_title + " " + p.text : p.text;
        auto counts = term_counts(tokenize(text, opts.tokenizer));
        for (const auto& [term, tf] : counts) {
            index.vocab_[term].push_back(Posting{static_cast<std::uint32_t>(ord), tf});
        }
        index.ids_.push_back(std::move(p.id));
    }

    // Norms need every df, so they come in a second pass over the postings. Terms are visited
    // in sorted order so the floating-point sums do not depend on hash-table layout.
    index.norms_.assign(index.ids_.size(), 0.0);
    for (const auto& term : index.terms()) {
        double idf = index.idf(term);
        for (const auto& post : index.postings(term)) {
            double w = log_tf(post.tf) * idf;
            index.norms_[post.doc] += w * w;
        }
    }
    for (auto& n : index.norms_) n = std::sqrt(n);
    return index;
}

std::size_t InvertedIndex::document_frequency(std::string_view term) const {
    return postings(term).size();
}

const std::vector<Posting>& InvertedIndex::postings(std::string_view term) const {
    auto it = vocab_.find(std::string(term));
    return it == vocab_.end() ? kNoPostings : it->second;
}

double InvertedIndex::idf(std::string_view term) const {
    auto df = document_frequency(term);
    if (df == 0) return 0.0;
    return 1.0 + std::log(static_cast<double>(passage_count()) / static_cast<double>(df));
}

std::vector<std::pair<std::string, double>> InvertedIndex::query_weights(
    std::string_view query) const {
    std::vector<std::pair<std::string, double>> weights;
    for (const auto& [term, tf] : term_counts(tokenize(query, opts_.tokenizer))) {
        if (document_frequency(term) == 0) continue;
        weights.emplace_back(term, log_tf(tf) * idf(term));
    }
    return weights;
}

std::vector<EvidenceHit> InvertedIndex::search(std::string_view query, std::size_t k) const {
    if (k == 0) throw Error("k must be >= 1");
    auto weights = query_weights(query);
    if (weights.empty()) return {};

    double qnorm = 0.0;
    for (const auto& [term, w] : weights) qnorm += w * w;
    qnorm = std::sqrt(qnorm);

    std::unordered_map<std::uint32_t, double> acc;
    for (const auto& [term, qw] : weights) {
        double idf_t = idf(term);
        for (const auto& post : postings(term)) {
            acc[post.doc] += qw * (log_tf(post.tf) * idf_t);
        }
    }

    struct Scored {
        double score;
        std::uint32_t doc;
    };
    auto better = [this](const Scored& a, const Scored& b) {
        return ranks_before(a.score, ids_[a.doc], b.score, ids_[b.doc]);
    };
    // Max-heap on "worse", so the top is the weakest of the current k.
    std::priority_queue<Scored, std::vector<Scored>, decltype(better)> heap(better);
    for (const auto& [doc, dot] : acc) {
        double score = dot / (qnorm * norms_[doc]);
        if (!(score > 0.0)) continue;
        Scored s{score, doc};
        if (heap.size() < k) {
            heap.push(s);
        } else if (better(s, heap.top())) {
            heap.pop();
            heap.push(s);
        }
    }

    std::vector<Scored> top;
    top.reserve(heap.size());
    while (!heap.empty()) {
        top.push_back(heap.top());
        heap.pop();
    }
    std::reverse(top.begin(), top.end());

    std::vector<EvidenceHit> hits;
    hits.reserve(top.size());
    for (const auto& s : top) {
        EvidenceHit h;
        h.passage_id = ids_[s.doc];
        h.score = s.score;
        h.retriever = RetrieverKind::TFIDF;
        h.query_text = std::string(query);
        hits.push_back(std::move(h));
    }
    return hits;
}

std::vector<std::string> InvertedIndex::terms() const {
    std::vector<std::string> out;
    out.reserve(vocab_.size());
    for (const auto& [t, _] : vocab_) out.push_back(t);
    std::sort(out.begin(), out.end());
    return out;
}

void InvertedIndex::save(const fs::path& dir) const {
    fs::create_directories(dir);
    json header{{"format_version", kFormatVersion},
                {"N", passage_count()},
                {"weighting", "ltc"},
                {"idf", "1+ln(N/df)"},
                {"index_title", opts_.index_title},
                {"stopwords", opts_.tokenizer.remove_stopwords},
                {"stem", opts_.tokenizer.stem},
                {"vocabulary", vocab_.size()}};
    std::ofstream(dir / "header.json", std::ios::trunc) << header.dump(2) << '\n';

    std::ofstream vocab(dir / "vocab.bin", std::ios::binary | std::ios::trunc);
    std::ofstream post(dir / "postings.bin", std::ios::binary | std::ios::trunc);
    std::uint64_t offset = 0;
    auto sorted = terms();
    binio::write<std::uint64_t>(vocab, sorted.size());
    for (const auto& term : sorted) {
        const auto& plist = vocab_.at(term);
        binio::write_string(vocab, term);
        binio::write<std::uint64_t>(vocab, offset);
        binio::write<std::uint32_t>(vocab, static_cast<std::uint32_t>(plist.size()));
        for (const auto& p : plist) {
            binio::write<std::uint32_t>(post, p.doc);
            binio::write<std::uint32_t>(post, p.tf);
        }
        offset += plist.size();
    }

    std::ofstream norms(dir / "norms.bin", std::ios::binary | std::ios::trunc);
    for (double n : norms_) binio::write<double>(norms, n);

    std::ofstream ids(dir / "docids.bin", std::ios::binary | std::ios::trunc);
    for (const auto& id : ids_) binio::write_string(ids, id);

    if (!vocab.flush() || !post.flush() || !norms.flush() || !ids.flush()) {
        throw Error("failed writing index into " + dir.string());
    }
}

InvertedIndex InvertedIndex::load(const fs::path& dir) {
    std::ifstream hin(dir / "header.json");
    if (!hin) throw NotFoundError("no index header in " + dir.string());
    json header = json::parse(hin);
    if (header.at("format_version").get<int>() != kFormatVersion) {
        throw ParseError("unsupported index format_version " + header["format_version"].dump());
    }
    if (header.at("weighting").get<std::string>() != "ltc") {
        throw ParseError("unsupported weighting " + header["weighting"].dump());
    }

    InvertedIndex index;
    index.opts_.index_title = header.value("index_title", false);
    index.opts_.tokenizer.remove_stopwords = header.value("stopwords", false);
    index.opts_.tokenizer.stem = header.value("stem", false);
    auto n = header.at("N").get<std::size_t>();

    std::ifstream vocab(dir / "vocab.bin", std::ios::binary);
    std::ifstream post(dir / "postings.bin", std::ios::binary);
    auto terms = binio::read<std::uint64_t>(vocab);
    index.vocab_.reserve(terms);
    for (std::uint64_t i = 0; i < terms; ++i) {
        auto term = binio::read_string(vocab);
        binio::read<std::uint64_t>(vocab);  // offset; postings are stored in term order
        auto df = binio::read<std::uint32_t>(vocab);
        std::vector<Posting> plist(df);
        for (auto& p : plist) {
            p.doc = binio::read<std::uint32_t>(post);
            p.tf = binio::read<std::uint32_t>(post);
        }
        index.vocab_.emplace(std::move(term), std::move(plist));
    }

    std::ifstream norms(dir / "norms.bin", std::ios::binary);
    std::ifstream ids(dir / "docids.bin", std::ios::binary);
    index.norms_.resize(n);
    index.ids_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        index.norms_[i] = binio::read<double>(norms);
        index.ids_[i] = binio::read_string(ids);
    }
    return index;
}

std::vector<EvidenceHit> retrieve_tfidf(const InvertedIndex& index, std::string_view query,
                                        std::size_t k) {
    return index.search(query, k);
}

}  // namespace factcheck
