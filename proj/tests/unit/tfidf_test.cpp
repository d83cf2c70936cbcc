#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "factcheck/error.hpp"
#include "factcheck/tfidf.hpp"
#include "test_support.hpp"

using namespace factcheck;
using namespace testsupport;

namespace {

InMemoryPassageStore store_of(const std::vector<Passage>& docs) {
    InMemoryPassageStore s;
    for (const auto& d : docs) s.add(d);
    return s;
}

std::vector<Passage> abc() {
    return {{"doc1", "T", 0, "a b"}, {"doc2", "T", 1, "a c"}, {"doc3", "T", 2, "c c"}};
}

void expect_same(const std::vector<EvidenceHit>& got, const std::vector<OracleHit>& want,
                 const std::string& query) {
    ASSERT_EQ(got.size(), want.size()) << query;
    for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].passage_id, want[i].id) << query << " rank " << i;
        EXPECT_NEAR(got[i].score, want[i].score, 1e-9) << query << " rank " << i;
    }
}

}  // namespace

TEST(TfidfIndex, DocumentFrequenciesOnToyCorpus) {
    auto idx = InvertedIndex::build(store_of(abc()));
    EXPECT_EQ(idx.passage_count(), 3u);
    EXPECT_EQ(idx.document_frequency("a"), 2u);
    EXPECT_EQ(idx.document_frequency("b"), 1u);
    EXPECT_EQ(idx.document_frequency("c"), 2u);
    EXPECT_EQ(idx.document_frequency("zzz"), 0u);
    EXPECT_EQ(idx.postings("c"), (std::vector<Posting>{{1, 1}, {2, 2}}));
    EXPECT_TRUE(idx.postings("zzz").empty());
}

TEST(TfidfIndex, SingleDocumentIdfIsOne) {
    auto idx = InvertedIndex::build(store_of({{"only", "P", 0, "x y y z"}}));
    for (const auto& t : idx.terms()) EXPECT_DOUBLE_EQ(idx.idf(t), 1.0) << t;
}

TEST(TfidfIndex, EmptyCorpusIsAnError) {
    EXPECT_THROW(InvertedIndex::build(InMemoryPassageStore{}), Error);
}

TEST(TfidfIndex, PostingsMatchNaiveRecount) {
    std::mt19937_64 rng(5);
    auto docs = random_corpus(rng, 1000, 400);
    auto idx = InvertedIndex::build(store_of(docs));

    // Naive scan: for each doc, re-split by hand and count.
    std::map<std::string, std::vector<Posting>> naive;
    for (std::uint32_t i = 0; i < docs.size(); ++i) {
        std::map<std::string, std::uint32_t> counts;
        std::string cur;
        for (char ch : docs[i].text + " ") {
            auto u = static_cast<unsigned char>(ch);
            if (std::isalnum(u) || u >= 0x80) {
                cur += static_cast<char>(std::tolower(u));
            } else if (!cur.empty()) {
                counts[cur]++;
                cur.clear();
            }
        }
        for (const auto& [t, c] : counts) naive[t].push_back({i, c});
    }
    auto terms = idx.terms();
    ASSERT_EQ(terms.size(), naive.size());
    for (const auto& t : terms) {
        ASSERT_TRUE(naive.count(t)) << t;
        EXPECT_EQ(idx.postings(t), naive[t]) << t;
        EXPECT_EQ(idx.document_frequency(t), naive[t].size()) << t;
    }
    for (std::size_t i = 0; i < idx.passage_count(); ++i) EXPECT_GT(idx.doc_norm(i), 0.0);
}

TEST(TfidfRetrieve, HigherTfRanksAbove) {
    auto idx = InvertedIndex::build(store_of(abc()));
    auto hits = retrieve_tfidf(idx, "c", 2);
    auto want = brute_force_tfidf(abc(), {"c"}, 2)[0];
    ASSERT_EQ(hits.size(), 2u);
    EXPECT_EQ(hits[0].passage_id, "doc3");
    EXPECT_EQ(hits[1].passage_id, "doc2");
    expect_same(hits, want, "c");
    EXPECT_EQ(hits[0].retriever, RetrieverKind::TFIDF);
    EXPECT_EQ(hits[0].query_text, "c");
}

TEST(TfidfRetrieve, OovAndEmptyQueriesGiveNothing) {
    auto idx = InvertedIndex::build(store_of(abc()));
    EXPECT_TRUE(retrieve_tfidf(idx, "unseen words", 3).empty());
    EXPECT_TRUE(retrieve_tfidf(idx, "", 3).empty());
    EXPECT_TRUE(retrieve_tfidf(idx, "?!", 3).empty());
}

TEST(TfidfRetrieve, KZeroIsRejected) {
    auto idx = InvertedIndex::build(store_of(abc()));
    EXPECT_THROW(retrieve_tfidf(idx, "a", 0), Error);
}

TEST(TfidfRetrieve, LargeKReturnsEveryPositiveDocOrdered) {
    auto idx = InvertedIndex::build(store_of(abc()));
    auto hits = retrieve_tfidf(idx, "a c", 100);
    ASSERT_EQ(hits.size(), 3u);
    for (std::size_t i = 1; i < hits.size(); ++i) {
        EXPECT_TRUE(ranks_before(hits[i - 1].score, hits[i - 1].passage_id, hits[i].score,
                                 hits[i].passage_id));
    }
}

TEST(TfidfRetrieve, TiesBreakByAscendingId) {
    // Identical texts, ids inserted out of order.
    std::vector<Passage> docs = {{"zeta", "T", 0, "red fox"}, {"alpha", "T", 1, "red fox"},
                                 {"mid", "T", 2, "red fox"}, {"other", "T", 3, "blue"}};
    auto idx = InvertedIndex::build(store_of(docs));
    auto hits = retrieve_tfidf(idx, "fox", 3);
    ASSERT_EQ(hits.size(), 3u);
    EXPECT_EQ(hits[0].passage_id, "alpha");
    EXPECT_EQ(hits[1].passage_id, "mid");
    EXPECT_EQ(hits[2].passage_id, "zeta");
    EXPECT_EQ(hits[0].score, hits[2].score);
}

TEST(TfidfRetrieve, MatchesBruteForceOnRandomCorpora) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 6; ++trial) {
        auto docs = random_corpus(rng, 200 + 150 * trial, 60 + 40 * trial);
        std::vector<std::string> queries;
        for (int q = 0; q < 40; ++q) queries.push_back(random_query(rng, 60 + 40 * trial));
        const std::size_t k = 1 + trial * 3;
        auto oracle = brute_force_tfidf(docs, queries, k);
        auto idx = InvertedIndex::build(store_of(docs));
        for (std::size_t q = 0; q < queries.size(); ++q) {
            expect_same(retrieve_tfidf(idx, queries[q], k), oracle[q], queries[q]);
        }
    }
}

TEST(TfidfRetrieve, TopKIsPrefixOfTopKPlusOne) {
    std::mt19937_64 rng(99);
    auto docs = random_corpus(rng, 300, 50);
    auto idx = InvertedIndex::build(store_of(docs));
    for (int q = 0; q < 30; ++q) {
        auto query = random_query(rng, 50);
        auto prev = retrieve_tfidf(idx, query, 1);
        for (std::size_t k = 2; k <= 15; ++k) {
            auto cur = retrieve_tfidf(idx, query, k);
            ASSERT_GE(cur.size(), prev.size());
            EXPECT_TRUE(std::equal(prev.begin(), prev.end(), cur.begin())) << query << " k=" << k;
            prev = std::move(cur);
        }
    }
}

TEST(TfidfRetrieve, IngestionOrderDoesNotChangeResults) {
    std::mt19937_64 rng(7);
    auto docs = random_corpus(rng, 250, 40);
    auto shuffled = docs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto a = InvertedIndex::build(store_of(docs));
    auto b = InvertedIndex::build(store_of(shuffled));
    for (int q = 0; q < 30; ++q) {
        auto query = random_query(rng, 40);
        auto ha = retrieve_tfidf(a, query, 10);
        auto hb = retrieve_tfidf(b, query, 10);
        ASSERT_EQ(ha.size(), hb.size()) << query;
        for (std::size_t i = 0; i < ha.size(); ++i) {
            EXPECT_EQ(ha[i].passage_id, hb[i].passage_id) << query;
            EXPECT_NEAR(ha[i].score, hb[i].score, 1e-12) << query;
        }
    }
}

TEST(TfidfIndex, SaveLoadRoundTrip) {
    std::mt19937_64 rng(3);
    auto docs = random_corpus(rng, 120, 30);
    auto idx = InvertedIndex::build(store_of(docs));
    TempDir tmp;
    idx.save(tmp / "idx");
    auto back = InvertedIndex::load(tmp / "idx");
    EXPECT_EQ(back.passage_count(), idx.passage_count());
    EXPECT_EQ(back.terms(), idx.terms());
    for (const auto& t : idx.terms()) EXPECT_EQ(back.postings(t), idx.postings(t));
    for (std::size_t i = 0; i < idx.passage_count(); ++i) {
        EXPECT_EQ(back.doc_norm(i), idx.doc_norm(i));
        EXPECT_EQ(back.passage_id(i), idx.passage_id(i));
    }
    for (int q = 0; q < 10; ++q) {
        auto query = random_query(rng, 30);
        EXPECT_EQ(retrieve_tfidf(back, query, 5), retrieve_tfidf(idx, query, 5));
    }
    EXPECT_THROW(InvertedIndex::load(tmp / "absent"), NotFoundError);
}

TEST(TfidfIndex, OptionsSurviveSaveAndAffectScoring) {
    std::vector<Passage> docs = {{"Cats#0", "Cats", 0, "the animals purr"},
                                 {"Dogs#0", "Dogs", 0, "the animals bark"}};
    IndexOptions opts;
    opts.index_title = true;
    opts.tokenizer.remove_stopwords = true;
    opts.tokenizer.stem = true;
    auto idx = InvertedIndex::build(store_of(docs), opts);
    EXPECT_EQ(idx.document_frequency("the"), 0u);
    EXPECT_EQ(idx.document_frequency("cat"), 1u);
    auto hits = retrieve_tfidf(idx, "the cats", 2);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].passage_id, "Cats#0");

    TempDir tmp;
    idx.save(tmp.path());
    auto back = InvertedIndex::load(tmp.path());
    EXPECT_TRUE(back.options().index_title);
    EXPECT_TRUE(back.options().tokenizer.stem);
    EXPECT_EQ(retrieve_tfidf(back, "the cats", 2), hits);
}
