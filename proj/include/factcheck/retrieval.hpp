#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace factcheck {

enum class RetrieverKind { TFIDF, DENSE };

std::string_view to_string(RetrieverKind kind) noexcept;
RetrieverKind retriever_kind_from_string(std::string_view s);

struct EvidenceHit {
    std::string passage_id;
    double score = 0.0;
    RetrieverKind retriever = RetrieverKind::TFIDF;
    std::string query_text;
    std::optional<int> subclaim_index;
    /// 0 = first-round retrieval, r = retrieval after the r-th edit.
    std::optional<int> round;

    bool operator==(const EvidenceHit&) const = default;
};

/// Ranking order shared by every retriever: higher score first, then ascending passage id.
inline bool ranks_before(double score_a, std::string_view id_a, double score_b,
                         std::string_view id_b) {
    if (score_a != score_b) return score_a > score_b;
    return id_a < id_b;
}

/// Top-k retrieval over an immutable backend. Implementations must be safe to call
/// concurrently.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual RetrieverKind kind() const = 0;
    virtual std::vector<EvidenceHit> retrieve(std::string_view query, std::size_t k) const = 0;
};

}  // namespace factcheck
