#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "kgqa/common.hpp"
#include "kgqa/kgstore.hpp"
#include "kgqa/model.hpp"
#include "kgqa/textproc.hpp"

namespace kgqa::nn {

struct SpanPrediction {
    std::vector<double> piece_start;  // zero at special pieces
    std::vector<double> piece_end;
    std::vector<double> word_start;
    std::vector<double> word_end;
    kg::WordSpan span;
};

namespace detail {

/// Softmax over the positions where `include` is true; others get 0.
template <typename T>
std::vector<T> masked_softmax(const std::vector<T>& logits, const std::vector<bool>& include) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (include[i]) mx = std::max(mx, logits[i]);
    }
    std::vector<T> out(logits.size(), T(0));
    T total = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (!include[i]) continue;
        out[i] = std::exp(logits[i] - mx);
        total += out[i];
    }
    for (auto& v : out) v /= total;
    return out;
}

inline std::vector<bool> real_pieces(const text::TokenizedQuestion& tq) {
    std::vector<bool> out(tq.size());
    for (std::size_t i = 0; i < tq.size(); ++i) out[i] = !tq.is_special(i);
    return out;
}

template <typename T>
std::vector<T> span_logits(const Mat<T>& output, const Mat<T>& w) {
    std::vector<T> out(static_cast<std::size_t>(output.rows()));
    for (Eigen::Index i = 0; i < output.rows(); ++i) out[static_cast<std::size_t>(i)] = output.row(i).dot(w.row(0));
    return out;
}

}  // namespace detail

/// Sums piece probabilities within each word's piece range.
inline std::vector<double> aggregate_to_words(const std::vector<double>& piece_probs,
                                              const std::vector<text::WordRange>& words) {
    std::vector<double> out(words.size(), 0.0);
    for (std::size_t w = 0; w < words.size(); ++w) {
        for (std::size_t p = words[w].first_piece; p <= words[w].last_piece; ++p) out[w] += piece_probs[p];
    }
    return out;
}

/// Argmax start and end; when the end precedes the start, the pair s <= e
/// with the highest p_start(s) * p_end(e) wins (ties: smallest s, then e).
inline kg::WordSpan decode_span(const std::vector<double>& word_start, const std::vector<double>& word_end) {
    require(!word_start.empty() && word_start.size() == word_end.size(), "decode_span needs equal, non-empty inputs");
    const auto s = static_cast<std::size_t>(std::max_element(word_start.begin(), word_start.end()) - word_start.begin());
    const auto e = static_cast<std::size_t>(std::max_element(word_end.begin(), word_end.end()) - word_end.begin());
    if (s <= e) return {s, e};
    kg::WordSpan best{0, 0};
    double best_p = -1.0;
    for (std::size_t i = 0; i < word_start.size(); ++i) {
        for (std::size_t j = i; j < word_end.size(); ++j) {
            const double p = word_start[i] * word_end[j];
            if (p > best_p) {
                best_p = p;
                best = {i, j};
            }
        }
    }
    return best;
}

template <typename T>
SpanPrediction predict_span(const Mat<T>& output, const text::TokenizedQuestion& tq, const HeadParameters<T>& head) {
    require(static_cast<std::size_t>(output.rows()) == tq.size(), "trace output does not match the tokenized question");
    require(!tq.words.empty(), "cannot predict a span over a question without words");
    const auto include = detail::real_pieces(tq);
    const auto ps = detail::masked_softmax(detail::span_logits(output, head.start), include);
    const auto pe = detail::masked_softmax(detail::span_logits(output, head.end), include);
    SpanPrediction out;
    out.piece_start.assign(ps.begin(), ps.end());
    out.piece_end.assign(pe.begin(), pe.end());
    const auto bounds = text::word_boundaries(tq);
    out.word_start = aggregate_to_words(out.piece_start, bounds);
    out.word_end = aggregate_to_words(out.piece_end, bounds);
    out.span = decode_span(out.word_start, out.word_end);
    return out;
}

/// softmax_k(x_CLS . w_k) over the relation vocabulary.
template <typename T>
std::vector<double> predict_relation(const Mat<T>& output, const HeadParameters<T>& head) {
    require(output.rows() >= 1, "relation prediction needs the [CLS] position");
    const Mat<T> logits = head.relation * output.row(0).transpose();
    std::vector<T> l(logits.data(), logits.data() + logits.size());
    const auto p = detail::masked_softmax(l, std::vector<bool>(l.size(), true));
    return {p.begin(), p.end()};
}

/// Piece targets for a word-level gold span: first piece of the first word,
/// last piece of the last word. Empty when the span fell off a truncated
/// question.
inline std::optional<std::pair<std::size_t, std::size_t>> span_targets(const text::TokenizedQuestion& tq,
                                                                        const kg::WordSpan& gold) {
    if (gold.end >= tq.words.size() || gold.start > gold.end) return std::nullopt;
    const auto b = text::word_boundaries(tq);
    return std::make_pair(b[gold.start].first_piece, b[gold.end].last_piece);
}

template <typename T>
struct LossResult {
    T loss = 0;
    Mat<T> d_output;               // gradient w.r.t. trace output
    HeadParameters<T> d_heads;     // only the touched heads are non-zero
};

template <typename T>
HeadParameters<T> zero_heads_like(const HeadParameters<T>& h) {
    return {Mat<T>::Zero(h.start.rows(), h.start.cols()), Mat<T>::Zero(h.end.rows(), h.end.cols()),
            Mat<T>::Zero(h.relation.rows(), h.relation.cols())};
}

/// Start + end cross-entropy over non-special pieces.
template <typename T>
void span_loss_into(const Mat<T>& output, const text::TokenizedQuestion& tq, std::size_t start_piece,
                    std::size_t end_piece, const HeadParameters<T>& head, T weight, LossResult<T>& acc) {
    const auto include = detail::real_pieces(tq);
    require(include.at(start_piece) && include.at(end_piece), "span targets must be non-special pieces");
    auto one = [&](const Mat<T>& w, Mat<T>& dw, std::size_t target) {
        auto p = detail::masked_softmax(detail::span_logits(output, w), include);
        acc.loss += -weight * std::log(p[target]);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!include[i]) continue;
            const T dl = weight * (p[i] - (i == target ? T(1) : T(0)));
            const auto row = static_cast<Eigen::Index>(i);
            acc.d_output.row(row) += dl * w.row(0);
            dw.row(0) += dl * output.row(row);
        }
    };
    one(head.start, acc.d_heads.start, start_piece);
    one(head.end, acc.d_heads.end, end_piece);
}

template <typename T>
void relation_loss_into(const Mat<T>& output, std::size_t relation, const HeadParameters<T>& head, T weight,
                        LossResult<T>& acc) {
    require(relation < static_cast<std::size_t>(head.relation.rows()), "relation index outside vocabulary");
    const Mat<T> logits = head.relation * output.row(0).transpose();
    std::vector<T> l(logits.data(), logits.data() + logits.size());
    auto p = detail::masked_softmax(l, std::vector<bool>(l.size(), true));
    acc.loss += -weight * std::log(p[relation]);
    Eigen::Matrix<T, Eigen::Dynamic, 1> dl(static_cast<Eigen::Index>(p.size()));
    for (std::size_t k = 0; k < p.size(); ++k) dl(static_cast<Eigen::Index>(k)) = weight * (p[k] - (k == relation ? T(1) : T(0)));
    acc.d_output.row(0) += (head.relation.transpose() * dl).transpose();
    acc.d_heads.relation.noalias() += dl * output.row(0);
}

template <typename T>
LossResult<T> make_loss_accumulator(const Mat<T>& output, const HeadParameters<T>& head) {
    LossResult<T> r;
    r.d_output = Mat<T>::Zero(output.rows(), output.cols());
    r.d_heads = zero_heads_like(head);
    return r;
}

struct LossWeights {
    double start_end = 1.0;  // applied to each of the start and end terms
    double relation = 1.0;
};

/// CE(start) + CE(end) + CE(relation) on a single trace.
template <typename T>
LossResult<T> joint_loss(const Mat<T>& output, const text::TokenizedQuestion& tq, std::size_t start_piece,
                         std::size_t end_piece, std::size_t relation, const HeadParameters<T>& head,
                         LossWeights w = {}) {
    auto acc = make_loss_accumulator(output, head);
    span_loss_into(output, tq, start_piece, end_piece, head, static_cast<T>(w.start_end), acc);
    relation_loss_into(output, relation, head, static_cast<T>(w.relation), acc);
    return acc;
}

}  // namespace kgqa::nn
