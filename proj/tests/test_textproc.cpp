#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "kgqa/textproc.hpp"
#include "support/fixtures.hpp"

using namespace kgqa;
using text::TokenizedQuestion;

namespace {

text::Vocabulary hash_prefix_vocab() {
    return text::Vocabulary({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "what", "songs", "have", "no", "#buo", "u",
                             "#ema", "#tsu", "produced"},
                            "#");
}

}  // namespace

TEST(Tokenize, SplitsRareWordsIntoSubwordUnits) {
    const auto vocab = hash_prefix_vocab();
    const auto tq = text::tokenize("What songs have Nobuo Uematsu produced", vocab);
    const std::vector<std::string> expected{"[CLS]", "what", "songs", "have", "no", "#buo",
                                            "u",     "#ema", "#tsu",  "produced", "[SEP]"};
    EXPECT_EQ(tq.pieces, expected);
    EXPECT_EQ(tq.words.size(), 6u);
    EXPECT_EQ(tq.word_index.front(), text::kSpecialWord);
    EXPECT_EQ(tq.word_index.back(), text::kSpecialWord);
}

TEST(Tokenize, WholeWordInVocabIsOnePiece) {
    const auto tq = text::tokenize("songs", hash_prefix_vocab());
    ASSERT_EQ(tq.size(), 3u);
    EXPECT_EQ(tq.pieces[1], "songs");
    EXPECT_EQ(tq.word_index[1], 0);
}

TEST(Tokenize, UnmatchableWordBecomesUnk) {
    const auto tq = text::tokenize("what zzz", hash_prefix_vocab());
    ASSERT_EQ(tq.size(), 4u);
    EXPECT_EQ(tq.pieces[2], "[UNK]");
    EXPECT_EQ(tq.word_index[2], 1);
}

TEST(Tokenize, PartialMatchStillFallsBackToUnkForWholeWord) {
    // "nox": "no" matches but "#x" does not
    const auto tq = text::tokenize("nox", hash_prefix_vocab());
    ASSERT_EQ(tq.size(), 3u);
    EXPECT_EQ(tq.pieces[1], "[UNK]");
}

TEST(Tokenize, PunctuationIsSeparateWord) {
    const auto words = text::split_words("Who wrote Gulliver's travels?");
    const std::vector<std::string> expected{"who", "wrote", "gulliver", "'", "s", "travels", "?"};
    EXPECT_EQ(words, expected);
}

TEST(Tokenize, SplitsOnUnicodeWhitespace) {
    const auto words = text::split_words("a\xC2\xA0" "b\xE3\x80\x80" "c");  // NBSP, ideographic space
    EXPECT_EQ(words, (std::vector<std::string>{"a", "b", "c"}));
}

TEST(Tokenize, TruncatesWholeWordsBeforeSep) {
    const auto vocab = hash_prefix_vocab();
    const auto tq = text::tokenize("what songs have nobuo", vocab, 5);
    EXPECT_EQ(tq.pieces, (std::vector<std::string>{"[CLS]", "what", "songs", "have", "[SEP]"}));
    EXPECT_EQ(tq.dropped_words, 1u);
}

TEST(WordBoundaries, MatchesPiecePositions) {
    const auto tq = text::tokenize("What songs have Nobuo Uematsu produced", hash_prefix_vocab());
    const auto b = text::word_boundaries(tq);
    ASSERT_EQ(b.size(), 6u);
    // [CLS]=0 what=1 songs=2 have=3 no=4 #buo=5
    EXPECT_EQ(b[3], (text::WordRange{4, 5}));
    EXPECT_EQ(b[4], (text::WordRange{6, 8}));
}

TEST(WordBoundaries, SingleWordCoversAllRealPieces) {
    const auto tq = text::tokenize("uematsu", hash_prefix_vocab());
    const auto b = text::word_boundaries(tq);
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0], (text::WordRange{1, tq.size() - 2}));
}

TEST(Vocabulary, LoadsPrefixMetadataLine) {
    const auto path = std::filesystem::temp_directory_path() / "kgqa_vocab_test.txt";
    {
        std::ofstream out(path);
        out << "#prefix=#\n[PAD]\n[UNK]\n[CLS]\n[SEP]\n[MASK]\nno\n#buo\n";
    }
    const auto v = text::Vocabulary::load(path);
    EXPECT_EQ(v.prefix(), "#");
    EXPECT_EQ(v.size(), 7u);
    EXPECT_EQ(v.find("[PAD]"), 0);
    EXPECT_EQ(v.find("#buo"), 6);
    std::filesystem::remove(path);
}

TEST(Vocabulary, RejectsMissingSpecials) {
    EXPECT_THROW(text::Vocabulary({"[PAD]", "[CLS]", "[SEP]", "[MASK]", "a"}), Error);
}

// Round trip and coverage properties over random words drawn from the
// vocabulary's own units.
TEST(TokenizeProperty, RoundTripAndCoverage) {
    const auto vocab = hash_prefix_vocab();
    std::mt19937_64 rng(7);
    const std::vector<std::string> stems{"no", "u", "what", "songs", "qq", "have"};
    const std::vector<std::string> tails{"", "buo", "ema", "tsu", "emabuo", "x"};
    for (int trial = 0; trial < 300; ++trial) {
        std::string question;
        const int n = 1 + static_cast<int>(rng() % 6);
        for (int w = 0; w < n; ++w) {
            question += stems[rng() % stems.size()] + tails[rng() % tails.size()] + " ";
        }
        const auto tq = text::tokenize(question, vocab);
        const auto again = text::tokenize(question, vocab);
        ASSERT_EQ(tq.pieces, again.pieces);
        ASSERT_EQ(tq.pieces.front(), "[CLS]");
        ASSERT_EQ(tq.pieces.back(), "[SEP]");
        const auto bounds = text::word_boundaries(tq);
        ASSERT_EQ(bounds.size(), tq.words.size());
        std::size_t expected_first = 1;
        for (std::size_t w = 0; w < bounds.size(); ++w) {
            ASSERT_EQ(bounds[w].first_piece, expected_first);
            expected_first = bounds[w].last_piece + 1;
            std::string rebuilt;
            for (std::size_t p = bounds[w].first_piece; p <= bounds[w].last_piece; ++p) {
                std::string piece = tq.pieces[p];
                if (p > bounds[w].first_piece) piece = piece.substr(vocab.prefix().size());
                rebuilt += piece;
            }
            if (rebuilt != "[UNK]") ASSERT_EQ(rebuilt, tq.words[w]);
        }
        ASSERT_EQ(expected_first, tq.size() - 1);
    }
}
