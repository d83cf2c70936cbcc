#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "factcheck/types.hpp"

namespace factcheck {

/// URL-safe, injective slug of a page title: spaces become '_', every byte outside
/// [A-Za-z0-9.~-] (including '_' itself and '#') is percent-encoded.
std::string page_slug(std::string_view title);

/// Passage id scheme: "<slug>#<seq>".
std::string make_passage_id(std::string_view page_title, std::size_t seq);

/// Splits on runs of whitespace. A word is a maximal run of non-whitespace bytes.
std::vector<std::string_view> split_words(std::string_view text);

/// Greedy fixed-size word windows; each window is re-joined with single spaces.
std::vector<std::string> chunk_words(std::string_view text, std::size_t words_per_passage);

/// Read-only access to passages by id and by ingestion ordinal.
class PassageStore {
public:
    virtual ~PassageStore() = default;
    virtual std::size_t size() const = 0;
    virtual Passage at(std::size_t ordinal) const = 0;
    /// Throws NotFoundError for unknown ids.
    virtual Passage get_passage(std::string_view id) const = 0;
    virtual std::optional<std::size_t> ordinal_of(std::string_view id) const = 0;
};

class InMemoryPassageStore final : public PassageStore {
public:
    InMemoryPassageStore() = default;
    explicit InMemoryPassageStore(std::vector<Passage> passages);

    /// Chunks and appends one page; returns the number of passages added.
    std::size_t add_page(std::string_view title, std::string_view body,
                         std::size_t words_per_passage = 100);
    void add(Passage p);

    std::size_t size() const override { return passages_.size(); }
    Passage at(std::size_t ordinal) const override;
    Passage get_passage(std::string_view id) const override;
    std::optional<std::size_t> ordinal_of(std::string_view id) const override;

private:
    std::vector<Passage> passages_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

struct Page {
    std::string title;
    std::string text;
};

struct CorpusManifest {
    std::size_t passages = 0;
    std::size_t pages = 0;
    std::size_t skipped = 0;
    std::size_t words_per_passage = 100;
    std::string created_at;
    std::filesystem::path storage;

    std::string to_json() const;
    static CorpusManifest from_json(std::string_view text, std::filesystem::path storage = {});
};

/// Pulls the next page; returns false at end of stream.
using PageSource = std::function<bool(Page&)>;

/// Chunks every page and writes the append-only record file, offset index and manifest
/// into `out_dir`. Empty pages are skipped and counted; a repeated title (or title slug)
/// is a hard error.
CorpusManifest ingest_dump(const PageSource& pages, const std::filesystem::path& out_dir,
                           std::size_t words_per_passage = 100);

/// JSONL pages file: one {"title", "text"} object per line.
CorpusManifest ingest_jsonl(const std::filesystem::path& pages_file,
                            const std::filesystem::path& out_dir,
                            std::size_t words_per_passage = 100);

/// On-disk corpus produced by ingest_dump. Immutable once opened; reads use pread and are
/// safe from any number of threads.
class Corpus final : public PassageStore {
public:
    static Corpus open(const std::filesystem::path& dir);

    Corpus(Corpus&&) noexcept;
    Corpus& operator=(Corpus&&) noexcept;
    Corpus(const Corpus&) = delete;
    Corpus& operator=(const Corpus&) = delete;
    ~Corpus() override;

    const CorpusManifest& manifest() const { return manifest_; }

    std::size_t size() const override { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    Passage at(std::size_t ordinal) const override;
    Passage get_passage(std::string_view id) const override;
    std::optional<std::size_t> ordinal_of(std::string_view id) const override;

private:
    Corpus() = default;

    CorpusManifest manifest_;
    int fd_ = -1;
    std::vector<std::uint64_t> offsets_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Maps dataset label strings onto the three canonical verdicts. Keys are compared after
/// lowercasing and turning spaces/hyphens into '_'.
class LabelMap {
public:
    /// supported/supports/entailed, refuted/refutes/not_supported,
    /// not_enough_info/nei/not_enough_information, partially_supported -> not_enough_info.
    static LabelMap defaults();

    void set(std::string_view source, VerdictLabel label);
    /// Throws ParseError listing the permitted values.
    VerdictLabel map(std::string_view source) const;
    std::vector<std::string> permitted() const;

private:
    std::map<std::string, VerdictLabel> map_;
};

std::vector<ClaimRecord> load_dataset(const std::filesystem::path& path, DatasetKind kind,
                                      const LabelMap& labels = LabelMap::defaults());

}  // namespace factcheck
