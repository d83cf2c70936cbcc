#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "factcheck/corpus.hpp"
#include "factcheck/http.hpp"
#include "factcheck/retrieval.hpp"

namespace factcheck {

using Vector = std::vector<float>;

/// Source of raw (possibly unnormalized) embeddings.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    /// Stable identifier of endpoint + model; stored with every embedding store.
    virtual std::string id() const = 0;
    virtual std::vector<Vector> embed_raw(const std::vector<std::string>& texts) = 0;
};

struct EmbeddingConfig {
    std::string kind = "http";  // "http" or "hash"
    std::string base_url = "http://localhost:8080";
    std::string model = "facebook/contriever";
    std::string api_key_env;  // empty: no Authorization header
    std::size_t dim = 256;    // "hash" only
    std::size_t batch_size = 64;
    std::size_t max_in_flight = 4;
    std::chrono::milliseconds timeout{60'000};
    RetryPolicy retry;
};

/// OpenAI-compatible embeddings endpoint: POST {model, input:[...]} -> {data:[{embedding}]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
public:
    HttpEmbeddingProvider(EmbeddingConfig cfg, std::unique_ptr<HttpTransport> transport);
    explicit HttpEmbeddingProvider(EmbeddingConfig cfg);

    std::string id() const override { return "http:" + cfg_.model; }
    std::vector<Vector> embed_raw(const std::vector<std::string>& texts) override;

    /// Request body for a batch; exposed for wire-format tests.
    std::string request_body(const std::vector<std::string>& texts) const;

private:
    EmbeddingConfig cfg_;
    std::unique_ptr<HttpTransport> transport_;
    RateLimiter limiter_;
};

/// Deterministic signed feature-hashing of tokens. Offline stand-in for a dense encoder.
class HashingEmbeddingProvider final : public EmbeddingProvider {
public:
    explicit HashingEmbeddingProvider(std::size_t dim) : dim_(dim) {}
    std::string id() const override { return "hash:" + std::to_string(dim_); }
    std::vector<Vector> embed_raw(const std::vector<std::string>& texts) override;

private:
    std::size_t dim_;
};

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingConfig& cfg);

/// L2-normalizes in place; throws on a zero vector.
void normalize(Vector& v);

/// Embeds and normalizes locally. All vectors in the batch must share one dimension.
std::vector<Vector> embed(const std::vector<std::string>& texts, EmbeddingProvider& provider);

/// Unit vectors for every passage, stored as a header JSON {dim, provider_id, count}, a flat
/// little-endian float32 matrix and the passage id list. Loaded stores are memory-mapped.
class EmbeddingStore {
public:
    EmbeddingStore(std::size_t dim, std::string provider_id);
    EmbeddingStore(EmbeddingStore&&) noexcept;
    EmbeddingStore& operator=(EmbeddingStore&&) noexcept;
    ~EmbeddingStore();

    void add(std::string passage_id, Vector unit_vector);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::string& provider_id() const { return provider_id_; }
    const std::string& passage_id(std::size_t ordinal) const { return ids_.at(ordinal); }
    std::span<const float> vector(std::size_t ordinal) const;

    void save(const std::filesystem::path& dir) const;
    static EmbeddingStore load(const std::filesystem::path& dir);

private:
    std::size_t dim_;
    std::string provider_id_;
    std::vector<std::string> ids_;
    std::vector<float> owned_;
    const float* mapped_ = nullptr;
    std::size_t mapped_bytes_ = 0;
};

/// Embeds every passage in batches of `batch_size`, with up to `workers` batches in flight.
EmbeddingStore build_embedding_store(const PassageStore& passages, EmbeddingProvider& provider,
                                     std::size_t batch_size = 64, std::size_t workers = 1);

/// Exact top-k by inner product of unit vectors; scores are clamped to [-1, 1].
std::vector<EvidenceHit> retrieve_dense(const EmbeddingStore& store, std::string_view query,
                                        std::size_t k, EmbeddingProvider& provider);

/// Same ranking for an already-normalized query vector.
std::vector<EvidenceHit> search_dense(const EmbeddingStore& store, std::span<const float> query,
                                      std::size_t k);

class DenseRetriever final : public Retriever {
public:
    /// Throws ConfigError if the store was built by a different provider.
    DenseRetriever(const EmbeddingStore& store, EmbeddingProvider& provider);
    RetrieverKind kind() const override { return RetrieverKind::DENSE; }
    std::vector<EvidenceHit> retrieve(std::string_view query, std::size_t k) const override;

private:
    const EmbeddingStore& store_;
    EmbeddingProvider& provider_;
};

}  // namespace factcheck
