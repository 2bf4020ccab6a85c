#include <gtest/gtest.h>

#include <sstream>

#include "kgqa/attention.hpp"
#include "support/fixtures.hpp"

using namespace kgqa;
using namespace kgqa::eval;
using kgqa::testing::random_model;
using kgqa::testing::small_config;
using kgqa::testing::tiny_vocab;

namespace {

std::vector<int> ids_for(const char* q) { return text::tokenize(q, tiny_vocab()).piece_ids; }

}  // namespace

TEST(AttentionSignature, MatchesIndependentMeanLoop) {
    const auto vocab = tiny_vocab();
    auto c = small_config(vocab.size());
    c.layers = 3;
    const auto m = random_model<double>(c, 4, 0.5);
    const auto tr = nn::forward<double>(ids_for("who wrote michael crichton ?"), m.encoder, c);
    const auto sig = attention_signature(tr);
    const auto n = static_cast<Eigen::Index>(tr.length());
    for (Eigen::Index i = 0; i < n; ++i) {
        double row = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            double acc = 0;
            for (std::size_t l = 0; l < c.layers; ++l)
                for (std::size_t h = 0; h < c.heads; ++h) acc += tr.layers[l].weights[h](i, j);
            EXPECT_NEAR(sig.beta(i, j), acc / static_cast<double>(c.layers * c.heads), 1e-12);
            row += sig.beta(i, j);
        }
        EXPECT_NEAR(row, 1.0, 1e-9);
    }
}

TEST(AttentionSignature, SingleHeadSingleLayerIsAlpha) {
    const auto vocab = tiny_vocab();
    auto c = small_config(vocab.size());
    c.layers = 1;
    c.heads = 1;
    const auto m = random_model<double>(c, 9, 0.5);
    const auto tr = nn::forward<double>(ids_for("where was crichton born"), m.encoder, c);
    EXPECT_EQ(attention_signature(tr).beta, tr.layers[0].weights[0]);
}

TEST(AttentionSignature, PermutationEquivariantWithoutPositions) {
    const auto vocab = tiny_vocab();
    const auto c = small_config(vocab.size());
    auto m = random_model<double>(c, 2, 0.5);
    m.encoder.position_emb.setZero();
    const std::vector<int> a{vocab.cls(), vocab.find("who"), vocab.find("wrote"), vocab.find("michael"), vocab.sep()};
    const std::vector<int> perm{0, 3, 1, 2, 4};
    std::vector<int> b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = a[static_cast<std::size_t>(perm[i])];
    const auto sa = attention_signature(nn::forward<double>(a, m.encoder, c));
    const auto sb = attention_signature(nn::forward<double>(b, m.encoder, c));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j)
            EXPECT_NEAR(sb.beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                        sa.beta(perm[i], perm[j]), 1e-12);
}

TEST(ClsAttentionRow, UniformAttentionGivesHundredOverN) {
    const auto vocab = tiny_vocab();
    const auto c = small_config(vocab.size());
    auto m = random_model<double>(c, 3, 0.5);
    for (auto& layer : m.encoder.layers)
        for (auto& q : layer.query) q.setZero();
    const auto tq = text::tokenize("who wrote michael crichton", vocab);
    ASSERT_EQ(tq.size(), 6u);
    const auto row = cls_attention_row(nn::forward<double>(tq.piece_ids, m.encoder, c), tq);
    ASSERT_EQ(row.size(), 6u);
    EXPECT_DOUBLE_EQ(row[0], 0.0);
    EXPECT_DOUBLE_EQ(row[5], 0.0);
    double total = 0;
    for (std::size_t j = 1; j < 5; ++j) {
        EXPECT_NEAR(row[j], 100.0 / 6.0, 1e-9);
        total += row[j];
    }
    EXPECT_LE(total, 100.0 + 1e-9);
}

TEST(WriteSignatureCsv, HeaderAndRows) {
    AttentionSignature sig;
    sig.beta = nn::Mat<double>::Identity(2, 2);
    sig.tokens = {"[CLS]", "a,b"};
    std::ostringstream os;
    write_signature_csv(os, sig);
    EXPECT_EQ(os.str(), "token,[CLS],\"a,b\"\n[CLS],1.000000,0.000000\n\"a,b\",0.000000,1.000000\n");
}
