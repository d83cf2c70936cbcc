#include "factcheck/dense.hpp"

#include <sys/mman.h>
#include <sys/stat.h>
#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "binio.hpp"
#include "factcheck/error.hpp"
#include "factcheck/text.hpp"

namespace factcheck {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace

HttpEmbeddingProvider::HttpEmbeddingProvider(EmbeddingConfig cfg,
                                             std::unique_ptr<HttpTransport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)), limiter_(cfg_.max_in_flight, 0) {}

HttpEmbeddingProvider::HttpEmbeddingProvider(EmbeddingConfig cfg)
    : HttpEmbeddingProvider(cfg, make_http_transport(cfg.base_url, cfg.timeout)) {}

std::string HttpEmbeddingProvider::request_body(const std::vector<std::string>& texts) const {
    return json{{"model", cfg_.model}, {"input", texts}}.dump();
}

std::vector<Vector> HttpEmbeddingProvider::embed_raw(const std::vector<std::string>& texts) {
    HttpHeaders headers;
    if (!cfg_.api_key_env.empty()) {
        const char* key = std::getenv(cfg_.api_key_env.c_str());
        if (!key) throw ConfigError("environment variable " + cfg_.api_key_env + " is not set");
        headers["Authorization"] = std::string("Bearer ") + key;
    }
    auto res = post_with_retry(*transport_, openai_endpoint_path(cfg_.base_url, "/embeddings"),
                               request_body(texts), headers, cfg_.retry, &limiter_);
    std::vector<Vector> out;
    try {
        auto j = json::parse(res.body);
        for (const auto& item : j.at("data")) {
            out.push_back(item.at("embedding").get<Vector>());
        }
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed embeddings response: ") + e.what(), res.status,
                            false);
    }
    if (out.size() != texts.size()) {
        throw ProviderError("embeddings response has " + std::to_string(out.size()) +
                                " vectors for " + std::to_string(texts.size()) + " inputs",
                            res.status, false);
    }
    return out;
}

std::vector<Vector> HashingEmbeddingProvider::embed_raw(const std::vector<std::string>& texts) {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        Vector v(dim_, 0.0f);
        for (const auto& tok : tokenize(text)) {
            auto h = fnv1a(tok);
            v[h % dim_] += (h >> 63) ? -1.0f : 1.0f;
        }
        // Keeps token-free texts embeddable.
        if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) v[0] = 1.0f;
        out.push_back(std::move(v));
    }
    return out;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const EmbeddingConfig& cfg) {
    if (cfg.kind == "http") return std::make_unique<HttpEmbeddingProvider>(cfg);
    if (cfg.kind == "hash") return std::make_unique<HashingEmbeddingProvider>(cfg.dim);
    throw ConfigError("unknown embedding provider kind '" + cfg.kind + "' (expected http or hash)");
}

void normalize(Vector& v) {
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    if (!(sq > 0.0) || !std::isfinite(sq)) throw Error("cannot normalize a zero or non-finite vector");
    double inv = 1.0 / std::sqrt(sq);
    for (float& x : v) x = static_cast<float>(x * inv);
}

std::vector<Vector> embed(const std::vector<std::string>& texts, EmbeddingProvider& provider) {
    if (texts.empty()) return {};
    auto vecs = provider.embed_raw(texts);
    if (vecs.size() != texts.size()) {
        throw Error("provider returned " + std::to_string(vecs.size()) + " vectors for " +
                    std::to_string(texts.size()) + " texts");
    }
    for (const auto& v : vecs) {
        if (v.size() != vecs.front().size()) {
            throw Error("embedding dimension mismatch within batch (" +
                        std::to_string(vecs.front().size()) + " vs " + std::to_string(v.size()) +
                        ")");
        }
    }
    for (auto& v : vecs) normalize(v);
    return vecs;
}

// ---------------------------------------------------------------------------

EmbeddingStore::EmbeddingStore(std::size_t dim, std::string provider_id)
    : dim_(dim), provider_id_(std::move(provider_id)) {
    if (dim_ == 0) throw Error("embedding dimension must be positive");
}

EmbeddingStore::EmbeddingStore(EmbeddingStore&& o) noexcept
    : dim_(o.dim_),
      provider_id_(std::move(o.provider_id_)),
      ids_(std::move(o.ids_)),
      owned_(std::move(o.owned_)),
      mapped_(std::exchange(o.mapped_, nullptr)),
      mapped_bytes_(std::exchange(o.mapped_bytes_, 0)) {}

EmbeddingStore& EmbeddingStore::operator=(EmbeddingStore&& o) noexcept {
    if (this != &o) {
        if (mapped_) ::munmap(const_cast<float*>(mapped_), mapped_bytes_);
        dim_ = o.dim_;
        provider_id_ = std::move(o.provider_id_);
        ids_ = std::move(o.ids_);
        owned_ = std::move(o.owned_);
        mapped_ = std::exchange(o.mapped_, nullptr);
        mapped_bytes_ = std::exchange(o.mapped_bytes_, 0);
    }
    return *this;
}

EmbeddingStore::~EmbeddingStore() {
    if (mapped_) ::munmap(const_cast<float*>(mapped_), mapped_bytes_);
}

void EmbeddingStore::add(std::string passage_id, Vector unit_vector) {
    if (mapped_) throw Error("memory-mapped embedding store is read-only");
    if (unit_vector.size() != dim_) {
        throw Error("vector of dim " + std::to_string(unit_vector.size()) + " added to store of dim " +
                    std::to_string(dim_));
    }
    ids_.push_back(std::move(passage_id));
    owned_.insert(owned_.end(), unit_vector.begin(), unit_vector.end());
}

std::span<const float> EmbeddingStore::vector(std::size_t ordinal) const {
    if (ordinal >= ids_.size()) throw NotFoundError("embedding ordinal out of range");
    const float* base = mapped_ ? mapped_ : owned_.data();
    return {base + ordinal * dim_, dim_};
}

void EmbeddingStore::save(const fs::path& dir) const {
    fs::create_directories(dir);
    json header{{"dim", dim_}, {"provider_id", provider_id_}, {"count", ids_.size()}};
    std::ofstream(dir / "header.json", std::ios::trunc) << header.dump(2) << '\n';

    std::ofstream mat(dir / "vectors.f32", std::ios::binary | std::ios::trunc);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        for (float x : vector(i)) binio::write<float>(mat, x);
    }
    std::ofstream ids(dir / "ids.txt", std::ios::trunc);
    for (const auto& id : ids_) ids << id << '\n';
    if (!mat.flush() || !ids.flush()) throw Error("failed writing embedding store " + dir.string());
}

EmbeddingStore EmbeddingStore::load(const fs::path& dir) {
    std::ifstream hin(dir / "header.json");
    if (!hin) throw NotFoundError("no embedding store header in " + dir.string());
    auto header = json::parse(hin);
    EmbeddingStore store(header.at("dim").get<std::size_t>(),
                         header.at("provider_id").get<std::string>());
    auto count = header.at("count").get<std::size_t>();

    std::ifstream ids(dir / "ids.txt");
    std::string id;
    while (std::getline(ids, id)) store.ids_.push_back(id);
    if (store.ids_.size() != count) throw ParseError("embedding store id count mismatch");

    const std::size_t bytes = count * store.dim_ * sizeof(float);
    if (bytes == 0) return store;
    int fd = ::open((dir / "vectors.f32").c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) throw NotFoundError("missing vectors.f32 in " + dir.string());
    struct stat st{};
    if (::fstat(fd, &st) != 0 || static_cast<std::size_t>(st.st_size) != bytes) {
        ::close(fd);
        throw ParseError("vectors.f32 size does not match header");
    }
    void* p = ::mmap(nullptr, bytes, PROT_READ, MAP_PRIVATE, fd, 0);
    ::close(fd);
    if (p == MAP_FAILED) throw Error("mmap failed for " + dir.string());
    store.mapped_ = static_cast<const float*>(p);
    store.mapped_bytes_ = bytes;
    return store;
}

EmbeddingStore build_embedding_store(const PassageStore& passages, EmbeddingProvider& provider,
                                     std::size_t batch_size, std::size_t workers) {
    batch_size = std::max<std::size_t>(1, batch_size);
    const std::size_t n = passages.size();
    const std::size_t batches = (n + batch_size - 1) / batch_size;
    std::vector<std::vector<Vector>> results(batches);

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr error;
    auto work = [&] {
        for (;;) {
            auto b = next.fetch_add(1);
            if (b >= batches) return;
            {
                std::lock_guard lock(err_mu);
                if (error) return;
            }
            try {
                std::vector<std::string> texts;
                for (std::size_t i = b * batch_size; i < std::min(n, (b + 1) * batch_size); ++i) {
                    texts.push_back(passages.at(i).text);
                }
                results[b] = embed(texts, provider);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!error) error = std::current_exception();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < std::max<std::size_t>(1, workers); ++w) pool.emplace_back(work);
        work();
    }
    if (error) std::rethrow_exception(error);

    std::size_t dim = 0;
    for (const auto& r : results) {
        if (!r.empty()) {
            dim = r.front().size();
            break;
        }
    }
    if (dim == 0) throw Error("cannot build an embedding store over an empty corpus");
    EmbeddingStore store(dim, provider.id());
    std::size_t ord = 0;
    for (auto& batch : results) {
        for (auto& v : batch) {
            if (v.size() != dim) throw Error("embedding dimension mismatch across batches");
            store.add(passages.at(ord++).id, std::move(v));
        }
    }
    return store;
}

std::vector<EvidenceHit> search_dense(const EmbeddingStore& store, std::span<const float> query,
                                      std::size_t k) {
    if (k == 0) throw Error("k must be >= 1");
    if (query.size() != store.dim()) {
        throw Error("query dim " + std::to_string(query.size()) + " != store dim " +
                    std::to_string(store.dim()));
    }
    struct Scored {
        double score;
        std::size_t ord;
    };
    std::vector<Scored> all;
    all.reserve(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
        auto v = store.vector(i);
        double dot = 0.0;
        for (std::size_t d = 0; d < v.size(); ++d) dot += static_cast<double>(v[d]) * query[d];
        all.push_back({std::clamp(dot, -1.0, 1.0), i});
    }
    auto better = [&](const Scored& a, const Scored& b) {
        return ranks_before(a.score, store.passage_id(a.ord), b.score, store.passage_id(b.ord));
    };
    auto top = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(top), all.end(), better);

    std::vector<EvidenceHit> hits;
    for (std::size_t i = 0; i < top; ++i) {
        EvidenceHit h;
        h.passage_id = store.passage_id(all[i].ord);
        h.score = all[i].score;
        h.retriever = RetrieverKind::DENSE;
        hits.push_back(std::move(h));
    }
    return hits;
}

std::vector<EvidenceHit> retrieve_dense(const EmbeddingStore& store, std::string_view query,
                                        std::size_t k, EmbeddingProvider& provider) {
    if (provider.id() != store.provider_id()) {
        throw ConfigError("embedding store built with '" + store.provider_id() +
                          "' but queried with '" + provider.id() + "'");
    }
    auto q = embed({std::string(query)}, provider);
    auto hits = search_dense(store, q.front(), k);
    for (auto& h : hits) h.query_text = std::string(query);
    return hits;
}

DenseRetriever::DenseRetriever(const EmbeddingStore& store, EmbeddingProvider& provider)
    : store_(store), provider_(provider) {
    if (provider.id() != store.provider_id()) {
        throw ConfigError("embedding store built with '" + store.provider_id() +
                          "' but provider is '" + provider.id() + "'");
    }
}

std::vector<EvidenceHit> DenseRetriever::retrieve(std::string_view query, std::size_t k) const {
    return retrieve_dense(store_, query, k, provider_);
}

}  // namespace factcheck
