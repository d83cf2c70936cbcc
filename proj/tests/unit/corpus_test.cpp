#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "factcheck/corpus.hpp"
#include "factcheck/error.hpp"
#include "test_support.hpp"

using namespace factcheck;
using namespace testsupport;

namespace {

std::string words(std::size_t n, const std::string& stem = "w") {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + stem + std::to_string(i);
    return s;
}

PageSource pages_of(std::vector<Page> pages) {
    auto state = std::make_shared<std::pair<std::vector<Page>, std::size_t>>(std::move(pages), 0);
    return [state](Page& out) {
        if (state->second >= state->first.size()) return false;
        out = state->first[state->second++];
        return true;
    };
}

}  // namespace

TEST(PageSlug, EncodesReservedBytesInjectively) {
    EXPECT_EQ(page_slug("Sister Carrie"), "Sister_Carrie");
    EXPECT_EQ(page_slug("A_B"), "A%5FB");
    EXPECT_EQ(page_slug("C#"), "C%23");
    EXPECT_EQ(page_slug("Caf\xC3\xA9"), "Caf%C3%A9");
    EXPECT_NE(page_slug("A B"), page_slug("A_B"));
    EXPECT_EQ(make_passage_id("Sister Carrie", 0), "Sister_Carrie#0");
}

TEST(ChunkWords, GreedyWindows) {
    auto chunks = chunk_words(words(250), 100);
    ASSERT_EQ(chunks.size(), 3u);
    EXPECT_EQ(split_words(chunks[0]).size(), 100u);
    EXPECT_EQ(split_words(chunks[1]).size(), 100u);
    EXPECT_EQ(split_words(chunks[2]).size(), 50u);
    EXPECT_EQ(chunk_words(words(100), 100).size(), 1u);
    EXPECT_TRUE(chunk_words("   ", 100).empty());
    EXPECT_EQ(chunk_words("a\n\n b\tc", 2), (std::vector<std::string>{"a b", "c"}));
}

TEST(Ingest, SplitsPersistsAndCounts) {
    TempDir tmp;
    auto m = ingest_dump(pages_of({{"Long", words(250)}, {"Exact", words(100)}, {"Empty", "  "}}),
                         tmp.path(), 100);
    EXPECT_EQ(m.passages, 4u);
    EXPECT_EQ(m.pages, 2u);
    EXPECT_EQ(m.skipped, 1u);
    EXPECT_EQ(m.words_per_passage, 100u);

    auto c = Corpus::open(tmp.path());
    ASSERT_EQ(c.size(), 4u);
    EXPECT_EQ(c.manifest().passages, 4u);
    EXPECT_EQ(c.at(0).id, "Long#0");
    EXPECT_EQ(c.at(2).seq, 2u);
    EXPECT_EQ(split_words(c.at(2).text).size(), 50u);
    auto exact = c.get_passage("Exact#0");
    EXPECT_EQ(exact.page_title, "Exact");
    EXPECT_EQ(exact.seq, 0u);
    EXPECT_EQ(exact.text, words(100));
    EXPECT_EQ(c.ordinal_of("Exact#0"), 3u);
    EXPECT_FALSE(c.ordinal_of("zzz").has_value());
    EXPECT_THROW(c.get_passage("zzz"), NotFoundError);
}

TEST(Ingest, DuplicateTitleIsAHardErrorNamingIt) {
    TempDir tmp;
    try {
        ingest_dump(pages_of({{"Same", "a b"}, {"Same", "c d"}}), tmp.path(), 10);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("Same"), std::string::npos) << e.what();
    }
}

TEST(Ingest, RejectsZeroWordsPerPassage) {
    TempDir tmp;
    EXPECT_THROW(ingest_dump(pages_of({{"A", "x"}}), tmp.path(), 0), Error);
}

TEST(Ingest, PropertiesOnRandomPages) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> len(0, 260), wpp(1, 60);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Page> pages;
        std::size_t per = static_cast<std::size_t>(wpp(rng));
        std::size_t expected = 0;
        for (int p = 0; p < 8; ++p) {
            auto n = static_cast<std::size_t>(len(rng));
            pages.push_back({"Page " + std::to_string(p), words(n)});
            expected += (n + per - 1) / per;
        }
        TempDir a, b;
        auto ma = ingest_dump(pages_of(pages), a.path(), per);
        ingest_dump(pages_of(pages), b.path(), per);
        EXPECT_EQ(ma.passages, expected);
        auto ca = Corpus::open(a.path());
        auto cb = Corpus::open(b.path());
        ASSERT_EQ(ca.size(), expected);
        ASSERT_EQ(cb.size(), expected);
        for (std::size_t i = 0; i < ca.size(); ++i) {
            auto pa = ca.at(i), pb = cb.at(i);
            EXPECT_EQ(pa, pb);  // re-ingestion is deterministic
            bool last = i + 1 == ca.size() || ca.at(i + 1).seq == 0;
            auto wc = split_words(pa.text).size();
            EXPECT_GT(wc, 0u);
            if (last) {
                EXPECT_LE(wc, per);
            } else {
                EXPECT_EQ(wc, per);
            }
        }
    }
}

TEST(Ingest, JsonlPagesFileAndMissingFile) {
    TempDir tmp;
    auto m = ingest_jsonl(fixtures_dir() / "toy_pages.jsonl", tmp / "corpus", kToyWords);
    EXPECT_EQ(m.passages, 50u);
    EXPECT_EQ(m.pages, 10u);
    auto c = Corpus::open(tmp / "corpus");
    EXPECT_EQ(c.get_passage(make_passage_id("Sister Carrie", 0)).page_title, "Sister Carrie");
    try {
        ingest_jsonl(tmp / "nope.jsonl", tmp / "c2", 100);
        FAIL();
    } catch (const NotFoundError& e) {
        EXPECT_NE(std::string(e.what()).find("nope.jsonl"), std::string::npos);
    }
}

TEST(Ingest, ByteIdenticalRoundTrip) {
    TempDir tmp;
    std::string body = "caf\xC3\xA9 \"quoted\" back\\slash tab\tnew\nline";
    ingest_dump(pages_of({{"Odd", body}}), tmp.path(), 100);
    auto c = Corpus::open(tmp.path());
    EXPECT_EQ(c.at(0).text, "caf\xC3\xA9 \"quoted\" back\\slash tab new line");
}

TEST(CorpusOpen, MissingDirectoryIsNotFound) {
    TempDir tmp;
    EXPECT_THROW(Corpus::open(tmp / "absent"), NotFoundError);
}

TEST(InMemoryStore, AddPageAndLookups) {
    InMemoryPassageStore s;
    EXPECT_EQ(s.add_page("T", words(5), 2), 3u);
    EXPECT_EQ(s.get_passage("T#2").text, "w4");
    EXPECT_THROW(s.get_passage("T#3"), NotFoundError);
    EXPECT_THROW(s.add(Passage{"T#0", "T", 0, "dup"}), Error);
}

// --- datasets ----------------------------------------------------------------------------------

TEST(LabelMap, DefaultsAndNormalization) {
    auto m = LabelMap::defaults();
    EXPECT_EQ(m.map("SUPPORTS"), VerdictLabel::Supported);
    EXPECT_EQ(m.map("Refutes"), VerdictLabel::Refuted);
    EXPECT_EQ(m.map("not supported"), VerdictLabel::Refuted);
    EXPECT_EQ(m.map("Not Enough Info"), VerdictLabel::NotEnoughInfo);
    EXPECT_EQ(m.map("not-enough-information"), VerdictLabel::NotEnoughInfo);
    EXPECT_EQ(m.map("partially_supported"), VerdictLabel::NotEnoughInfo);
    m.set("partially_supported", VerdictLabel::Supported);
    EXPECT_EQ(m.map("partially supported"), VerdictLabel::Supported);
}

TEST(LabelMap, UnknownLabelListsPermittedValues) {
    try {
        LabelMap::defaults().map("maybe");
        FAIL();
    } catch (const ParseError& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("maybe"), std::string::npos);
        EXPECT_NE(msg.find("supported"), std::string::npos);
        EXPECT_NE(msg.find("partially_supported"), std::string::npos);
    }
}

TEST(LoadDataset, ToyClaims) {
    auto recs = load_dataset(fixtures_dir() / "toy_claims.jsonl", DatasetKind::FM2);
    ASSERT_EQ(recs.size(), 6u);
    EXPECT_EQ(recs[0].claim_id, "c1");
    EXPECT_EQ(recs[0].gold_label, VerdictLabel::Refuted);
    EXPECT_EQ(recs[0].dataset, DatasetKind::FM2);
    ASSERT_EQ(recs[0].gold_evidence.size(), 2u);
    EXPECT_EQ(recs[0].gold_evidence[1].page_title, "Ray Mancini");
    EXPECT_FALSE(recs[0].gold_evidence[1].passage_id.has_value());
    EXPECT_EQ(recs[2].gold_evidence[0].passage_id, "High_Noon#3");
    EXPECT_EQ(recs[5].gold_label, VerdictLabel::NotEnoughInfo);
    EXPECT_EQ(recs[5].source_label, "not enough info");
    EXPECT_TRUE(recs[5].gold_evidence.empty());
}

TEST(LoadDataset, EmptyFileGivesEmptyList) {
    TempDir tmp;
    write_file(tmp / "empty.jsonl", "");
    EXPECT_TRUE(load_dataset(tmp / "empty.jsonl", DatasetKind::CUSTOM).empty());
}

TEST(LoadDataset, WicePartialLabelKeepsSourceLabel) {
    TempDir tmp;
    write_file(tmp / "w.jsonl",
               R"({"claim_id":"w1","claim":"x","label":"partially_supported","gold":[{"page":"P","sentence":"s","passage_id":null}]})"
               "\n");
    auto recs = load_dataset(tmp / "w.jsonl", DatasetKind::WICE);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].gold_label, VerdictLabel::NotEnoughInfo);
    EXPECT_EQ(recs[0].source_label, "partially_supported");
}

namespace {

std::size_t error_line(const std::string& content) {
    TempDir tmp;
    write_file(tmp / "d.jsonl", content);
    try {
        load_dataset(tmp / "d.jsonl", DatasetKind::CUSTOM);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

const std::string kGood =
    R"({"claim_id":"a","claim":"c","label":"supported","gold":[{"page":"P","sentence":"s","passage_id":null}]})"
    "\n";

}  // namespace

TEST(LoadDataset, ErrorsCarryLineNumbers) {
    EXPECT_EQ(error_line(kGood + "{not json\n"), 2u);
    EXPECT_EQ(error_line(kGood + kGood + R"({"claim_id":"b","claim":"c","label":"weird","gold":[]})" "\n"), 3u);
    // empty claim
    EXPECT_EQ(error_line(R"({"claim_id":"b","claim":"","label":"supported","gold":[{"page":"P","sentence":"s"}]})" "\n"), 1u);
    // gold ref without sentence or passage id
    EXPECT_EQ(error_line(R"({"claim_id":"b","claim":"c","label":"supported","gold":[{"page":"P","sentence":null,"passage_id":null}]})" "\n"), 1u);
    // empty gold only allowed for not-enough-info
    EXPECT_EQ(error_line(kGood + R"({"claim_id":"b","claim":"c","label":"refuted","gold":[]})" "\n"), 2u);
    // missing field
    EXPECT_EQ(error_line(R"({"claim_id":"b","label":"refuted","gold":[]})" "\n"), 1u);
}

TEST(LoadDataset, MissingFileIsNotFound) {
    EXPECT_THROW(load_dataset("/nonexistent/claims.jsonl", DatasetKind::CUSTOM), NotFoundError);
}
