#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "factcheck/corpus.hpp"
#include "factcheck/retrieval.hpp"
#include "factcheck/text.hpp"

namespace factcheck {

struct Posting {
    std::uint32_t doc;  // passage ordinal
    std::uint32_t tf;

    bool operator==(const Posting&) const = default;
};

struct IndexOptions {
    TokenizerOptions tokenizer;
    /// Prepend the page title to each passage's indexed text.
    bool index_title = false;
};

/// ltc TF-IDF inverted index.
///
/// Term weight in a passage or query is (1 + ln tf) * idf(t) with idf(t) = 1 + ln(N / df(t));
/// both sides are cosine-normalized, so a score is the cosine between the two weight
/// vectors. Query terms absent from the vocabulary carry no weight.
class InvertedIndex {
public:
    static constexpr int kFormatVersion = 1;

    static InvertedIndex build(const PassageStore& passages, const IndexOptions& opts = {});

    std::size_t passage_count() const { return ids_.size(); }
    std::size_t vocabulary_size() const { return vocab_.size(); }
    const IndexOptions& options() const { return opts_; }

    /// 0 for unknown terms.
    std::size_t document_frequency(std::string_view term) const;
    /// Empty for unknown terms. Sorted by ascending passage ordinal.
    const std::vector<Posting>& postings(std::string_view term) const;
    double idf(std::string_view term) const;
    double doc_norm(std::size_t ordinal) const { return norms_.at(ordinal); }
    const std::string& passage_id(std::size_t ordinal) const { return ids_.at(ordinal); }

    /// Query weight vector (unnormalized), one entry per distinct in-vocabulary term,
    /// sorted by term.
    std::vector<std::pair<std::string, double>> query_weights(std::string_view query) const;

    /// Exact top-k by cosine; only passages with a positive score are returned.
    std::vector<EvidenceHit> search(std::string_view query, std::size_t k) const;

    std::vector<std::string> terms() const;

    void save(const std::filesystem::path& dir) const;
    static InvertedIndex load(const std::filesystem::path& dir);

private:
    IndexOptions opts_;
    std::unordered_map<std::string, std::vector<Posting>> vocab_;
    std::vector<double> norms_;
    std::vector<std::string> ids_;
};

std::vector<EvidenceHit> retrieve_tfidf(const InvertedIndex& index, std::string_view query,
                                        std::size_t k);

class TfidfRetriever final : public Retriever {
public:
    explicit TfidfRetriever(const InvertedIndex& index) : index_(index) {}
    RetrieverKind kind() const override { return RetrieverKind::TFIDF; }
    std::vector<EvidenceHit> retrieve(std::string_view query, std::size_t k) const override {
        return retrieve_tfidf(index_, query, k);
    }

private:
    const InvertedIndex& index_;
};

}  // namespace factcheck
