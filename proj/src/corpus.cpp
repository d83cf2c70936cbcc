#include "factcheck/corpus.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "binio.hpp"
#include "factcheck/error.hpp"

namespace factcheck {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kRecordFile = "passages.jsonl";
constexpr const char* kOffsetFile = "offsets.bin";
constexpr const char* kIdFile = "ids.txt";
constexpr const char* kManifestFile = "manifest.json";

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Passage passage_from_record(std::string_view line) {
    auto j = json::parse(line);
    return Passage{j.at("id").get<std::string>(), j.at("title").get<std::string>(),
                   j.at("seq").get<std::size_t>(), j.at("text").get<std::string>()};
}

std::string normalize_label_key(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        if (c == ' ' || c == '-') out.push_back('_');
        else out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

}  // namespace

std::string page_slug(std::string_view title) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(title.size());
    for (unsigned char c : title) {
        if (c == ' ') {
            out.push_back('_');
        } else if (std::isalnum(c) || c == '-' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(kHex[c >> 4]);
            out.push_back(kHex[c & 0xF]);
        }
    }
    return out;
}

std::string make_passage_id(std::string_view page_title, std::size_t seq) {
    return page_slug(page_title) + "#" + std::to_string(seq);
}

std::vector<std::string_view> split_words(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) words.push_back(text.substr(start, i - start));
    }
    return words;
}

std::vector<std::string> chunk_words(std::string_view text, std::size_t words_per_passage) {
    if (words_per_passage == 0) throw Error("words_per_passage must be >= 1");
    auto words = split_words(text);
    std::vector<std::string> chunks;
    for (std::size_t i = 0; i < words.size(); i += words_per_passage) {
        std::string chunk;
        auto end = std::min(words.size(), i + words_per_passage);
        for (std::size_t w = i; w < end; ++w) {
            if (w > i) chunk.push_back(' ');
            chunk.append(words[w]);
        }
        chunks.push_back(std::move(chunk));
    }
    return chunks;
}

// ---------------------------------------------------------------------------

InMemoryPassageStore::InMemoryPassageStore(std::vector<Passage> passages) {
    for (auto& p : passages) add(std::move(p));
}

void InMemoryPassageStore::add(Passage p) {
    auto [it, inserted] = by_id_.emplace(p.id, passages_.size());
    if (!inserted) throw Error("duplicate passage id '" + p.id + "'");
    passages_.push_back(std::move(p));
}

std::size_t InMemoryPassageStore::add_page(std::string_view title, std::string_view body,
                                           std::size_t words_per_passage) {
    auto chunks = chunk_words(body, words_per_passage);
    for (std::size_t seq = 0; seq < chunks.size(); ++seq) {
        add(Passage{make_passage_id(title, seq), std::string(title), seq, std::move(chunks[seq])});
    }
    return chunks.size();
}

Passage InMemoryPassageStore::at(std::size_t ordinal) const {
    if (ordinal >= passages_.size()) throw NotFoundError("passage ordinal out of range");
    return passages_[ordinal];
}

Passage InMemoryPassageStore::get_passage(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) throw NotFoundError("passage not found: '" + std::string(id) + "'");
    return passages_[it->second];
}

std::optional<std::size_t> InMemoryPassageStore::ordinal_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------

std::string CorpusManifest::to_json() const {
    json j{{"passages", passages},
           {"pages", pages},
           {"skipped", skipped},
           {"words_per_passage", words_per_passage},
           {"created_at", created_at}};
    return j.dump(2);
}

CorpusManifest CorpusManifest::from_json(std::string_view text, fs::path storage) {
    auto j = json::parse(text);
    CorpusManifest m;
    m.passages = j.at("passages").get<std::size_t>();
    m.pages = j.at("pages").get<std::size_t>();
    m.skipped = j.at("skipped").get<std::size_t>();
    m.words_per_passage = j.at("words_per_passage").get<std::size_t>();
    m.created_at = j.at("created_at").get<std::string>();
    m.storage = std::move(storage);
    return m;
}

CorpusManifest ingest_dump(const PageSource& pages, const fs::path& out_dir,
                           std::size_t words_per_passage) {
    if (words_per_passage == 0) throw Error("words_per_passage must be >= 1");
    fs::create_directories(out_dir);

    std::ofstream records(out_dir / kRecordFile, std::ios::binary | std::ios::trunc);
    std::ofstream offsets(out_dir / kOffsetFile, std::ios::binary | std::ios::trunc);
    std::ofstream ids(out_dir / kIdFile, std::ios::binary | std::ios::trunc);
    if (!records || !offsets || !ids) throw Error("cannot write corpus into " + out_dir.string());

    CorpusManifest manifest;
    manifest.words_per_passage = words_per_passage;
    manifest.storage = out_dir;

    std::unordered_set<std::string> seen_slugs;
    std::uint64_t offset = 0;
    Page page;
    while (pages(page)) {
        if (!seen_slugs.insert(page_slug(page.title)).second) {
            throw Error("duplicate page title '" + page.title + "'");
        }
        auto chunks = chunk_words(page.text, words_per_passage);
        if (chunks.empty()) {
            ++manifest.skipped;
            continue;
        }
        ++manifest.pages;
        for (std::size_t seq = 0; seq < chunks.size(); ++seq) {
            auto id = make_passage_id(page.title, seq);
            std::string line =
                json{{"id", id}, {"title", page.title}, {"seq", seq}, {"text", chunks[seq]}}.dump();
            line.push_back('\n');
            binio::write<std::uint64_t>(offsets, offset);
            records.write(line.data(), static_cast<std::streamsize>(line.size()));
            ids << id << '\n';
            offset += line.size();
            ++manifest.passages;
        }
    }
    binio::write<std::uint64_t>(offsets, offset);
    if (!records.flush() || !offsets.flush() || !ids.flush()) {
        throw Error("write failure in " + out_dir.string());
    }

    manifest.created_at = utc_timestamp();
    std::ofstream(out_dir / kManifestFile, std::ios::trunc) << manifest.to_json() << '\n';
    return manifest;
}

CorpusManifest ingest_jsonl(const fs::path& pages_file, const fs::path& out_dir,
                            std::size_t words_per_passage) {
    std::ifstream in(pages_file);
    if (!in) throw NotFoundError("cannot open pages file " + pages_file.string());
    std::size_t line_no = 0;
    std::string line;
    PageSource source = [&](Page& page) {
        while (std::getline(in, line)) {
            ++line_no;
            if (std::all_of(line.begin(), line.end(),
                            [](unsigned char c) { return std::isspace(c); })) {
                continue;
            }
            try {
                auto j = json::parse(line);
                page.title = j.at("title").get<std::string>();
                page.text = j.at("text").get<std::string>();
            } catch (const json::exception& e) {
                throw ParseError(pages_file.string() + ": " + e.what(), line_no);
            }
            return true;
        }
        return false;
    };
    return ingest_dump(source, out_dir, words_per_passage);
}

// ---------------------------------------------------------------------------

Corpus Corpus::open(const fs::path& dir) {
    Corpus c;
    c.manifest_ = CorpusManifest::from_json(read_file(dir / kManifestFile), dir);

    std::ifstream offsets(dir / kOffsetFile, std::ios::binary);
    if (!offsets) throw NotFoundError("missing offset index in " + dir.string());
    c.offsets_.reserve(c.manifest_.passages + 1);
    for (std::size_t i = 0; i <= c.manifest_.passages; ++i) {
        c.offsets_.push_back(binio::read<std::uint64_t>(offsets));
    }

    std::ifstream ids(dir / kIdFile);
    c.by_id_.reserve(c.manifest_.passages);
    std::string id;
    while (std::getline(ids, id)) c.by_id_.emplace(id, c.by_id_.size());
    if (c.by_id_.size() != c.manifest_.passages) {
        throw ParseError("corpus id list does not match manifest in " + dir.string());
    }

    c.fd_ = ::open((dir / kRecordFile).c_str(), O_RDONLY | O_CLOEXEC);
    if (c.fd_ < 0) throw NotFoundError("missing passage records in " + dir.string());
    return c;
}

Corpus::Corpus(Corpus&& other) noexcept
    : manifest_(std::move(other.manifest_)),
      fd_(std::exchange(other.fd_, -1)),
      offsets_(std::move(other.offsets_)),
      by_id_(std::move(other.by_id_)) {}

Corpus& Corpus::operator=(Corpus&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0) ::close(fd_);
        manifest_ = std::move(other.manifest_);
        fd_ = std::exchange(other.fd_, -1);
        offsets_ = std::move(other.offsets_);
        by_id_ = std::move(other.by_id_);
    }
    return *this;
}

Corpus::~Corpus() {
    if (fd_ >= 0) ::close(fd_);
}

Passage Corpus::at(std::size_t ordinal) const {
    if (ordinal >= size()) throw NotFoundError("passage ordinal out of range");
    auto begin = offsets_[ordinal];
    auto len = offsets_[ordinal + 1] - begin;
    std::string buf(len, '\0');
    std::size_t done = 0;
    while (done < len) {
        auto n = ::pread(fd_, buf.data() + done, len - done, static_cast<off_t>(begin + done));
        if (n <= 0) throw Error("short read from passage records");
        done += static_cast<std::size_t>(n);
    }
    return passage_from_record(buf);
}

Passage Corpus::get_passage(std::string_view id) const {
    auto ord = ordinal_of(id);
    if (!ord) throw NotFoundError("passage not found: '" + std::string(id) + "'");
    return at(*ord);
}

std::optional<std::size_t> Corpus::ordinal_of(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------

LabelMap LabelMap::defaults() {
    LabelMap m;
    for (auto s : {"supported", "supports", "support", "entailed", "true"}) {
        m.set(s, VerdictLabel::Supported);
    }
    for (auto s : {"refuted", "refutes", "refute", "not_supported", "false"}) {
        m.set(s, VerdictLabel::Refuted);
    }
    for (auto s : {"not_enough_info", "not_enough_information", "not enough evidence", "nei",
                   "partially_supported"}) {
        m.set(s, VerdictLabel::NotEnoughInfo);
    }
    return m;
}

void LabelMap::set(std::string_view source, VerdictLabel label) {
    map_[normalize_label_key(source)] = label;
}

VerdictLabel LabelMap::map(std::string_view source) const {
    auto it = map_.find(normalize_label_key(source));
    if (it != map_.end()) return it->second;
    std::string allowed;
    for (const auto& p : permitted()) {
        if (!allowed.empty()) allowed += ", ";
        allowed += p;
    }
    throw ParseError("unknown label '" + std::string(source) + "'; permitted values: " + allowed);
}

std::vector<std::string> LabelMap::permitted() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : map_) out.push_back(k);
    return out;
}

std::vector<ClaimRecord> load_dataset(const fs::path& path, DatasetKind kind,
                                      const LabelMap& labels) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open dataset " + path.string());

    std::vector<ClaimRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
            continue;
        }
        ClaimRecord rec;
        rec.dataset = kind;
        try {
            auto j = json::parse(line);
            rec.claim_id = j.at("claim_id").get<std::string>();
            rec.claim = j.at("claim").get<std::string>();
            rec.source_label = j.at("label").get<std::string>();
            for (const auto& g : j.value("gold", json::array())) {
                GoldEvidenceRef ref;
                ref.page_title = g.value("page", std::string{});
                if (g.contains("sentence") && !g["sentence"].is_null()) {
                    ref.sentence = g["sentence"].get<std::string>();
                }
                if (g.contains("passage_id") && !g["passage_id"].is_null()) {
                    ref.passage_id = g["passage_id"].get<std::string>();
                }
                if (!ref.sentence && !ref.passage_id) {
                    throw ParseError("gold evidence needs a sentence or a passage_id", line_no);
                }
                rec.gold_evidence.push_back(std::move(ref));
            }
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": " + e.what(), line_no);
        }
        try {
            rec.gold_label = labels.map(rec.source_label);
        } catch (const ParseError& e) {
            throw ParseError(e.what(), line_no);
        }
        if (rec.claim.empty()) throw ParseError("empty claim", line_no);
        if (rec.gold_evidence.empty() && rec.gold_label != VerdictLabel::NotEnoughInfo) {
            throw ParseError("claim '" + rec.claim_id + "' has no gold evidence", line_no);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

}  // namespace factcheck
