#include <gtest/gtest.h>

#include <random>

#include "kgqa/kgstore.hpp"

using namespace kgqa;
using kg::KnowledgeGraph;

namespace {

const char* kThreeTriples = "e1\tr1\te2\ne3\tr1\te2\ne1\tr2\te4\n";

}  // namespace

TEST(LoadGraph, ComputesDegreesAndOutgoingRelations) {
    const auto g = kg::parse_graph(kThreeTriples);
    EXPECT_EQ(g.in_degree("e2"), 2u);
    EXPECT_EQ(g.out_degree("e1"), 2u);
    EXPECT_EQ(g.entity("e1").outgoing_relations, (std::set<std::string>{"r1", "r2"}));
    EXPECT_EQ(g.in_degree("e9"), 0u);
    EXPECT_EQ(g.out_degree("e9"), 0u);
}

TEST(LoadGraph, DeduplicatesTriples) {
    const auto g = kg::parse_graph("e1\tr1\te2\ne1\tr1\te2\n");
    EXPECT_EQ(g.triples().size(), 1u);
    EXPECT_EQ(g.in_degree("e2"), 1u);
}

TEST(LoadGraph, ReportsLineNumberOfMalformedLine) {
    try {
        kg::parse_graph("e1\tr1\te2\ne1\tr1\n", "t.tsv");
        FAIL() << "expected a parse error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parse);
        EXPECT_NE(std::string(e.what()).find("t.tsv:2"), std::string::npos);
    }
}

TEST(LoadGraph, EmptyFileIsAnError) {
    try {
        kg::parse_graph("");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::empty_input);
    }
}

TEST(LoadGraph, LiteralObjectsGetNoEntityRecord) {
    const auto g = kg::parse_graph("e1\tborn_in\t\"1942\"\n");
    EXPECT_EQ(g.find("\"1942\""), nullptr);
    EXPECT_EQ(kg::lookup_answers("e1", "born_in", g), (std::vector<std::string>{"\"1942\""}));
}

TEST(LookupAnswers, ReturnsObjectsOrEmpty) {
    const auto g = kg::parse_graph(kThreeTriples);
    EXPECT_EQ(kg::lookup_answers("e1", "r1", g), (std::vector<std::string>{"e2"}));
    EXPECT_TRUE(kg::lookup_answers("e1", "r99", g).empty());
    EXPECT_TRUE(kg::lookup_answers("e_unknown", "r1", g).empty());
}

TEST(LoadLexicon, AccumulatesNamesInOrderAndFallsBackToId) {
    auto g = kg::parse_graph("e1\tr1\te9\n");
    kg::parse_lexicon("e1\tMichael Crichton\ne1\tM. Crichton\n", g);
    EXPECT_EQ(g.names("e1"), (std::vector<std::string>{"Michael Crichton", "M. Crichton"}));
    EXPECT_EQ(g.names("e9"), (std::vector<std::string>{"e9"}));
}

TEST(LoadLexicon, KeepsUnknownEntity) {
    auto g = kg::parse_graph(kThreeTriples);
    kg::parse_lexicon("e77\tGhost\n", g);
    ASSERT_NE(g.find("e77"), nullptr);
    EXPECT_EQ(g.names("e77"), (std::vector<std::string>{"Ghost"}));
    EXPECT_EQ(g.out_degree("e77"), 0u);
}

TEST(LoadLexicon, MalformedLine) {
    auto g = kg::parse_graph(kThreeTriples);
    EXPECT_THROW(kg::parse_lexicon("e1\n", g), Error);
}

TEST(LoadDataset, DerivesLongestMatchingSpan) {
    auto g = kg::parse_graph("m1\tbirthplace\tm2\n");
    kg::parse_lexicon("m1\tMichael Crichton\n", g);
    const auto ds = kg::parse_dataset("m1\tbirthplace\tm2\twhere was michael crichton born\n", g);
    ASSERT_EQ(ds.size(), 1u);
    EXPECT_TRUE(ds[0].solvable);
    EXPECT_EQ(ds[0].gold_span, (kg::WordSpan{2, 3}));
}

TEST(LoadDataset, UnsolvableWhenNameAbsent) {
    auto g = kg::parse_graph("m1\tbirthplace\tm2\n");
    kg::parse_lexicon("m1\tMichael Crichton\n", g);
    kg::DatasetDiagnostics diag;
    const auto ds = kg::parse_dataset("m1\tbirthplace\tm2\twhere was he born\n", g, &diag);
    EXPECT_FALSE(ds[0].solvable);
    EXPECT_FALSE(ds[0].gold_span.has_value());
    EXPECT_EQ(diag.unsolvable, 1u);
}

TEST(LoadDataset, LongerNameMatchWins) {
    auto g = kg::parse_graph("m1\tr\tm2\n");
    kg::parse_lexicon("m1\tCrichton\nm1\tMichael Crichton\n", g);
    const auto ds = kg::parse_dataset("m1\tr\tm2\twho is michael crichton\n", g);
    EXPECT_EQ(ds[0].gold_span, (kg::WordSpan{2, 3}));
}

TEST(LoadDataset, EqualLengthTiesPickLeftmost) {
    const auto span = kg::derive_span({"a", "x", "b", "x"}, {"x"});
    EXPECT_EQ(span, (kg::WordSpan{1, 1}));
}

TEST(LoadDataset, UnknownRelationIsKeptAndCounted) {
    auto g = kg::parse_graph("m1\tr\tm2\n");
    kg::DatasetDiagnostics diag;
    const auto ds = kg::parse_dataset("m1\tnope\tm2\twhat about m1\n", g, &diag);
    EXPECT_EQ(ds.size(), 1u);
    EXPECT_EQ(diag.unknown_relations, 1u);
}

TEST(LoadDataset, MalformedLine) {
    auto g = kg::parse_graph("m1\tr\tm2\n");
    EXPECT_THROW(kg::parse_dataset("m1\tr\tm2\n", g), Error);
}

TEST(GraphProperty, DegreesMatchLinearScanAndLoadIsIdempotent) {
    std::mt19937_64 rng(11);
    std::string content;
    for (int i = 0; i < 400; ++i) {
        content += "e" + std::to_string(rng() % 30) + "\tr" + std::to_string(rng() % 5) + "\te" +
                   std::to_string(rng() % 30) + "\n";
    }
    const auto g = kg::parse_graph(content);
    const auto g2 = kg::parse_graph(content);
    EXPECT_EQ(g.triples(), g2.triples());
    for (const auto& id : g.entity_ids()) {
        std::size_t in = 0, out = 0;
        for (const auto& t : g.triples()) {
            in += t.object == id;
            out += t.subject == id;
        }
        EXPECT_EQ(g.in_degree(id), in) << id;
        EXPECT_EQ(g.out_degree(id), out) << id;
        EXPECT_EQ(g2.in_degree(id), in);
    }
}

TEST(DatasetProperty, SolvableSpansAreNameSubsequences) {
    auto g = kg::parse_graph("a\tr\tb\nc\tr\tb\n");
    kg::parse_lexicon("a\tThe Lost World\nc\tJurassic Park\nc\tPark\n", g);
    const auto ds = kg::parse_dataset(
        "a\tr\tb\twho wrote the lost world\n"
        "a\tr\tb\twhat world is lost\n"
        "c\tr\tb\twhere is park located\n"
        "c\tr\tb\twho made jurassic park ?\n",
        g);
    for (const auto& ex : ds) {
        ASSERT_TRUE(ex.solvable);
        const auto words = text::split_words(ex.question);
        const auto span_text = text::join_words(words, ex.gold_span->start, ex.gold_span->end);
        bool found = false;
        for (const auto& name : g.names(ex.gold_subject)) {
            if (text::normalize(name).find(span_text) != std::string::npos) found = true;
        }
        EXPECT_TRUE(found) << ex.question;
    }
}
