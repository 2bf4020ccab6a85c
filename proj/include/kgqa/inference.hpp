#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "kgqa/encoder.hpp"
#include "kgqa/heads.hpp"
#include "kgqa/model.hpp"
#include "kgqa/textproc.hpp"

namespace kgqa {

/// How relation prediction sees the entity mention.
///  none      - one shared pass for span and relation (the default)
///  attention - a second pass whose attention mask hides the mention pieces
///  token     - a second pass with the mention replaced by one [MASK] piece
enum class EntityMasking { none, attention, token };

inline const char* to_string(EntityMasking m) {
    switch (m) {
        case EntityMasking::none: return "none";
        case EntityMasking::attention: return "attention";
        case EntityMasking::token: return "token";
    }
    return "none";
}

inline EntityMasking parse_entity_masking(std::string_view s) {
    if (s == "none" || s == "false" || s == "off") return EntityMasking::none;
    if (s == "attention") return EntityMasking::attention;
    if (s == "token" || s == "true" || s == "on") return EntityMasking::token;
    fail(ErrorKind::config, "entity_mask_ablation must be none|attention|token, got '{}'", s);
}

/// A trained model plus everything needed to run it on raw text.
struct QAModel {
    nn::Model<float> model;
    text::Vocabulary vocab;
    std::vector<std::string> relations;
    EntityMasking masking = EntityMasking::none;
    std::size_t max_pieces = text::kDefaultMaxPieces;

    int relation_index(const std::string& r) const {
        for (std::size_t i = 0; i < relations.size(); ++i) {
            if (relations[i] == r) return static_cast<int>(i);
        }
        return -1;
    }
};

/// Relation-pass input for the masking ablations. `tq_out`/`mask_out` are
/// what the encoder should see.
inline void relation_view(const text::TokenizedQuestion& tq, const text::Vocabulary& vocab, EntityMasking masking,
                          const kg::WordSpan& span, text::TokenizedQuestion& tq_out, nn::AttentionMask& mask_out) {
    mask_out.clear();
    if (masking == EntityMasking::token) {
        tq_out = text::mask_words(tq, vocab, span.start, span.end);
        return;
    }
    tq_out = tq;
    if (masking == EntityMasking::attention) {
        mask_out.assign(tq.size(), false);
        for (std::size_t p = 0; p < tq.size(); ++p) {
            const int w = tq.word_index[p];
            if (w != text::kSpecialWord && static_cast<std::size_t>(w) >= span.start &&
                static_cast<std::size_t>(w) <= span.end) {
                mask_out[p] = true;
            }
        }
    }
}

struct Inference {
    text::TokenizedQuestion tq;
    nn::ForwardTrace<float> trace;
    nn::SpanPrediction span;
    std::vector<double> relation_probs;
};

inline Inference infer(const QAModel& qa, std::string_view question) {
    Inference out;
    out.tq = text::tokenize(question, qa.vocab, qa.max_pieces);
    if (out.tq.words.empty()) fail(ErrorKind::no_answer, "question has no words");
    out.trace = nn::forward<float>(out.tq.piece_ids, qa.model.encoder, qa.model.config);
    out.span = nn::predict_span(out.trace.output, out.tq, qa.model.heads);
    if (qa.masking == EntityMasking::none) {
        out.relation_probs = nn::predict_relation(out.trace.output, qa.model.heads);
    } else {
        text::TokenizedQuestion rtq;
        nn::AttentionMask mask;
        relation_view(out.tq, qa.vocab, qa.masking, out.span.span, rtq, mask);
        const auto rtrace = nn::forward<float>(rtq.piece_ids, qa.model.encoder, qa.model.config, mask);
        out.relation_probs = nn::predict_relation(rtrace.output, qa.model.heads);
    }
    return out;
}

inline std::string span_text(const text::TokenizedQuestion& tq, const kg::WordSpan& span) {
    return text::join_words(tq.words, span.start, span.end);
}

}  // namespace kgqa
