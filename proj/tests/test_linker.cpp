#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "kgqa/linker.hpp"
#include "support/random_graph.hpp"

using namespace kgqa;
using namespace kgqa::link;

namespace {

// Full-matrix edit distance over bytes (ASCII inputs only).
std::size_t dp_distance(const std::string& a, const std::string& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i)
        for (std::size_t j = 1; j <= b.size(); ++j)
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
    return d[a.size()][b.size()];
}

kg::KnowledgeGraph graph_with(const std::string& triples, const std::string& lexicon) {
    auto g = kg::parse_graph(triples);
    kg::parse_lexicon(lexicon, g);
    return g;
}

}  // namespace

TEST(BuildIndex, ContainsEveryNameWord) {
    const auto g = graph_with("e1\tr\te2\n", "e1\tMichael Crichton\n");
    const auto idx = build_index(g);
    ASSERT_NE(idx.find("michael"), nullptr);
    EXPECT_TRUE(idx.find("michael")->count("e1"));
    EXPECT_TRUE(idx.find("crichton")->count("e1"));
}

TEST(BuildIndex, SharedWordListsBothEntities) {
    const auto g = graph_with("e1\tr\te2\n", "e1\tJohn Smith\ne2\tJohn Lee\n");
    const auto idx = build_index(g);
    EXPECT_EQ(*idx.find("john"), (std::set<std::string>{"e1", "e2"}));
}

TEST(BuildIndex, MatchesLinearScanOn100Entities) {
    const auto g = kgqa::testing::random_graph(100, 8, 300, 7);
    const auto idx = build_index(g);
    std::set<std::string> words;
    for (const auto& id : g.entity_ids())
        for (const auto& n : g.names(id))
            for (const auto& w : text::split_words(n)) words.insert(w);
    EXPECT_EQ(idx.word_count(), words.size());
    for (const auto& w : words) {
        std::set<std::string> expected;
        for (const auto& id : g.entity_ids()) {
            for (const auto& n : g.names(id)) {
                const auto ws = text::split_words(n);
                if (std::find(ws.begin(), ws.end(), w) != ws.end()) expected.insert(id);
            }
        }
        ASSERT_NE(idx.find(w), nullptr);
        EXPECT_EQ(*idx.find(w), expected) << w;
    }
}

TEST(IndexSnapshot, RoundTripsAndRejectsBadMagic) {
    const auto g = kgqa::testing::random_graph(30, 4, 60, 3);
    const auto idx = build_index(g);
    std::stringstream ss;
    save_index(ss, idx);
    EXPECT_EQ(load_index(ss), idx);
    std::string bytes = ss.str();
    bytes[0] = 'X';
    std::stringstream bad(bytes);
    EXPECT_THROW(load_index(bad), Error);
}

TEST(ScoreSimilarity, IdenticalAndTokenSorted) {
    EXPECT_DOUBLE_EQ(score_similarity("michael crichton", "michael crichton"), 1.0);
    EXPECT_DOUBLE_EQ(score_similarity("crichton michael", "michael crichton"), 1.0);
    EXPECT_DOUBLE_EQ(score_similarity("Michael", "michael"), 1.0);
}

TEST(ScoreSimilarity, SuffixCase) {
    const std::string a = "michael crichton", b = "michael crichton jr";
    EXPECT_EQ(dp_distance(a, b), 3u);
    const double oracle = 1.0 - static_cast<double>(dp_distance(a, b)) / 19.0;
    EXPECT_NEAR(score_similarity(a, b), oracle, 1e-12);
    EXPECT_NEAR(score_similarity(a, b), 0.842, 1e-3);
}

TEST(ScoreSimilarity, EmptyInputs) {
    EXPECT_DOUBLE_EQ(score_similarity("", ""), 1.0);
    EXPECT_DOUBLE_EQ(score_similarity("", "x"), 0.0);
}

TEST(ScoreSimilarity, SymmetricAndMatchesDpOracleOnRandomStrings) {
    auto rng = make_stream(11, "strings");
    auto word = [&] {
        std::string s;
        const auto n = 1 + uniform_index(rng, 6);
        for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>('a' + uniform_index(rng, 4)));
        return s;
    };
    for (int k = 0; k < 200; ++k) {
        const std::string a = word() + " " + word(), b = word() + (uniform01(rng) < 0.5 ? " " + word() : "");
        EXPECT_DOUBLE_EQ(score_similarity(a, b), score_similarity(b, a));
        const double s1 = 1.0 - static_cast<double>(dp_distance(a, b)) / static_cast<double>(std::max(a.size(), b.size()));
        EXPECT_GE(score_similarity(a, b), s1 - 1e-15);
        EXPECT_LE(score_similarity(a, b), 1.0);
    }
}

TEST(Levenshtein, CountsCodePoints) {
    EXPECT_EQ(levenshtein(U"café", U"cafe"), 1u);
    EXPECT_NEAR(edit_ratio("caf\xc3\xa9", "cafe"), 0.75, 1e-12);
}

TEST(GenerateCandidates, ExactUniqueNameRanksFirst) {
    const auto g = graph_with("e1\tr\te2\ne2\tr\te3\n", "e1\tMichael Crichton\ne2\tMichael Jordan\ne3\tAnna\n");
    const auto c = generate_candidates("michael crichton", build_index(g), g);
    ASSERT_FALSE(c.empty());
    EXPECT_EQ(c[0].entity, "e1");
    EXPECT_DOUBLE_EQ(c[0].similarity, 1.0);
    EXPECT_EQ(c[0].matched_name, "Michael Crichton");
}

TEST(GenerateCandidates, OutDegreeBreaksSimilarityTies) {
    std::string triples;
    for (int i = 0; i < 7; ++i) triples += "b\tr" + std::to_string(i) + "\tx\n";
    for (int i = 0; i < 2; ++i) triples += "a\tr" + std::to_string(i) + "\tx\n";
    const auto g = graph_with(triples, "a\tjohn smith\nb\tjohn smith\n");
    const auto c = generate_candidates("john smith", build_index(g), g);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].entity, "b");
    EXPECT_EQ(c[0].out_degree, 7u);
}

TEST(GenerateCandidates, TopKMatchesFullSort) {
    // 120 entities sharing the word "john"
    std::string triples, lexicon;
    auto rng = make_stream(5, "pool");
    static const char* tails[] = {"smith", "lee", "stone", "hill", "river", "north"};
    for (int i = 0; i < 120; ++i) {
        const auto id = "j" + std::to_string(i);
        const auto deg = 1 + uniform_index(rng, 4);
        for (std::size_t d = 0; d < deg; ++d) triples += id + "\tr" + std::to_string(d) + "\tx\n";
        lexicon += id + "\tjohn " + tails[uniform_index(rng, 6)] + "\n";
    }
    const auto g = graph_with(triples, lexicon);
    const auto idx = build_index(g);
    LinkerOptions wide;
    wide.limit = 1000;
    auto full = generate_candidates("john smith", idx, g, wide);
    ASSERT_EQ(full.size(), 120u);
    // independent sort of the whole pool
    std::vector<std::tuple<double, std::size_t, std::string>> keys;
    for (const auto& id : g.entity_ids()) {
        if (id == "x") continue;
        double best = 0;
        for (const auto& n : g.names(id)) best = std::max(best, score_similarity("john smith", n));
        keys.emplace_back(-best, g.out_degree(id), id);
    }
    std::sort(keys.begin(), keys.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
    });
    const auto top = generate_candidates("john smith", idx, g);
    ASSERT_EQ(top.size(), 50u);
    for (std::size_t k = 0; k < 120; ++k) EXPECT_EQ(full[k].entity, std::get<2>(keys[k]));
    for (std::size_t k = 0; k < 50; ++k) EXPECT_EQ(top[k].entity, std::get<2>(keys[k]));
}

TEST(GenerateCandidates, StopWordsDoNotSeedThePool) {
    const auto g = graph_with("e1\tr\te2\n", "e1\tthe river\ne2\tthe hill\n");
    const auto c = generate_candidates("the hill", build_index(g), g);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0].entity, "e2");
    EXPECT_TRUE(generate_candidates("zzz", build_index(g), g).empty());
}

TEST(RecallAt, HitsMissesAndMonotone) {
    auto cands = [](std::initializer_list<const char*> ids) {
        std::vector<Candidate> v;
        for (auto id : ids) v.push_back({id, "", 1.0, 0, 0});
        return v;
    };
    std::vector<std::vector<Candidate>> preds{cands({"a", "b", "g"}), cands({"x"}), cands({})};
    std::vector<std::string> golds{"g", "y", "z"};
    EXPECT_DOUBLE_EQ(recall_at(preds, golds, 2), 0.0);
    EXPECT_DOUBLE_EQ(recall_at(preds, golds, 5), 1.0 / 3);
    double prev = 0;
    for (std::size_t n = 1; n < 10; ++n) {
        EXPECT_GE(recall_at(preds, golds, n), prev);
        prev = recall_at(preds, golds, n);
    }
    EXPECT_THROW(recall_at(preds, golds, 0), Error);
}
