#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "kgqa/common.hpp"
#include "kgqa/model.hpp"

namespace kgqa::nn {

/// Per-position attention-target mask: true excludes the position as a key.
using AttentionMask = std::vector<bool>;

template <typename T>
struct NormCache {
    Mat<T> normalized;   // (x - mean) * rstd
    std::vector<T> rstd;
};

template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const Mat<T>& gain, const Mat<T>& bias, double eps, NormCache<T>* cache) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    Mat<T> xhat(n, d);
    std::vector<T> rstd(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const T mean = x.row(i).mean();
        const auto centered = (x.row(i).array() - mean).matrix();
        const T var = centered.squaredNorm() / static_cast<T>(d);
        const T r = T(1) / std::sqrt(var + static_cast<T>(eps));
        rstd[static_cast<std::size_t>(i)] = r;
        xhat.row(i) = centered * r;
    }
    Mat<T> y = (xhat.array().rowwise() * gain.row(0).array()).rowwise() + bias.row(0).array();
    if (cache) {
        cache->normalized = std::move(xhat);
        cache->rstd = std::move(rstd);
    }
    return y;
}

/// Returns d(input); accumulates into d_gain / d_bias.
template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const NormCache<T>& cache, const Mat<T>& gain, Mat<T>& d_gain,
                           Mat<T>& d_bias) {
    const Eigen::Index n = dy.rows();
    const Eigen::Index d = dy.cols();
    d_gain.row(0) += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
    d_bias.row(0) += dy.colwise().sum();
    Mat<T> dx(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto dxhat = (dy.row(i).array() * gain.row(0).array()).matrix();
        const T mean_dxhat = dxhat.mean();
        const T mean_dxhat_xhat = dxhat.dot(cache.normalized.row(i)) / static_cast<T>(d);
        dx.row(i) = ((dxhat.array() - mean_dxhat) - cache.normalized.row(i).array() * mean_dxhat_xhat) *
                    cache.rstd[static_cast<std::size_t>(i)];
    }
    return dx;
}

template <typename T>
struct LayerTrace {
    Mat<T> input;                  // x^l, N x d_model
    std::vector<Mat<T>> query, key, value;
    std::vector<Mat<T>> logits;    // a_{l,h}, N x N (masked entries -inf)
    std::vector<Mat<T>> weights;   // alpha_{l,h}, N x N
    Mat<T> concat;                 // heads' summaries side by side
    Mat<T> summary;                // h^l after optional output projection
    NormCache<T> attn_norm;
    Mat<T> attn_normed;
    Mat<T> ffn_pre;                // h W1 + b1
    Mat<T> ffn_act;                // ReLU(ffn_pre)
    NormCache<T> ffn_norm;
};

template <typename T>
struct ForwardTrace {
    std::vector<int> piece_ids;
    AttentionMask mask;
    Mat<T> embedding_sum;          // token + position + segment
    NormCache<T> emb_norm;
    Mat<T> embeddings;             // x^1
    std::vector<LayerTrace<T>> layers;
    Mat<T> output;                 // x^{L+1}

    std::size_t length() const { return piece_ids.size(); }
};

namespace detail {

template <typename T>
Mat<T> embedding_sum(std::span<const int> piece_ids, const EncoderParameters<T>& p, const ModelConfig& c) {
    if (piece_ids.size() > c.max_positions) {
        fail(ErrorKind::length, "sequence of {} pieces exceeds max positions {}", piece_ids.size(), c.max_positions);
    }
    const auto n = static_cast<Eigen::Index>(piece_ids.size());
    Mat<T> sum(n, static_cast<Eigen::Index>(c.d_model));
    for (Eigen::Index i = 0; i < n; ++i) {
        const int id = piece_ids[static_cast<std::size_t>(i)];
        if (id < 0 || static_cast<std::size_t>(id) >= c.vocab_size) {
            fail(ErrorKind::contract, "piece id {} outside vocabulary of size {}", id, c.vocab_size);
        }
        sum.row(i) = p.token_emb.row(id) + p.position_emb.row(i) + p.segment_emb.row(0);
    }
    return sum;
}

}  // namespace detail

/// token + position + segment embeddings followed by the embedding norm.
template <typename T>
Mat<T> embed(std::span<const int> piece_ids, const EncoderParameters<T>& p, const ModelConfig& c) {
    return layer_norm(detail::embedding_sum(piece_ids, p, c), p.emb_norm_gain, p.emb_norm_bias, c.layer_norm_eps,
                      static_cast<NormCache<T>*>(nullptr));
}

template <typename T>
Mat<T> attention_scores(const Mat<T>& x, std::size_t l, std::size_t h, const EncoderParameters<T>& p,
                        const ModelConfig& c, const AttentionMask& mask = {}) {
    const auto& layer = p.layers.at(l);
    const Mat<T> q = x * layer.query.at(h);
    const Mat<T> k = x * layer.key.at(h);
    Mat<T> logits = q * k.transpose();
    if (c.scale_attention) logits *= T(1) / std::sqrt(static_cast<T>(c.d_head()));
    if (!mask.empty()) {
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            if (mask[static_cast<std::size_t>(j)]) logits.col(j).setConstant(-std::numeric_limits<T>::infinity());
        }
    }
    return logits;
}

/// Row-wise softmax; -inf entries become exactly 0.
template <typename T>
Mat<T> attention_weights(const Mat<T>& logits) {
    Mat<T> out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const T mx = logits.row(i).maxCoeff();
        if (!std::isfinite(mx)) {
            fail(ErrorKind::contract, "attention row {} has no unmasked target", i);
        }
        T total = 0;
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            const T v = logits(i, j);
            const T e = std::isinf(v) ? T(0) : std::exp(v - mx);
            out(i, j) = e;
            total += e;
        }
        out.row(i) /= total;
    }
    return out;
}

/// Concatenated per-head alpha-weighted value sums, then the optional
/// d_model x d_model output projection.
template <typename T>
Mat<T> attention_summarize(const Mat<T>& x, const std::vector<Mat<T>>& weights, std::size_t l,
                           const EncoderParameters<T>& p, const ModelConfig& c) {
    const auto& layer = p.layers.at(l);
    const auto dh = static_cast<Eigen::Index>(c.d_head());
    Mat<T> concat(x.rows(), static_cast<Eigen::Index>(c.d_model));
    for (std::size_t h = 0; h < c.heads; ++h) {
        concat.middleCols(static_cast<Eigen::Index>(h) * dh, dh).noalias() = weights[h] * (x * layer.value[h]);
    }
    if (!c.output_projection) return concat;
    return concat * layer.attn_out;
}

template <typename T>
Mat<T> position_feedforward(const Mat<T>& h, std::size_t l, const EncoderParameters<T>& p) {
    const auto& layer = p.layers.at(l);
    Mat<T> pre = (h * layer.w1).rowwise() + layer.b1.row(0);
    Mat<T> out = (pre.cwiseMax(T(0)) * layer.w2).rowwise() + layer.b2.row(0);
    return out;
}

/// Post-norm encoder: x -> LN(x + Attn(x)) -> LN(. + FFN(.)) per layer.
template <typename T>
ForwardTrace<T> forward(std::span<const int> piece_ids, const EncoderParameters<T>& p, const ModelConfig& c,
                        const AttentionMask& mask = {}) {
    if (!mask.empty() && mask.size() != piece_ids.size()) {
        fail(ErrorKind::contract, "mask length {} != sequence length {}", mask.size(), piece_ids.size());
    }
    ForwardTrace<T> tr;
    tr.piece_ids.assign(piece_ids.begin(), piece_ids.end());
    tr.mask = mask;
    tr.embedding_sum = detail::embedding_sum(piece_ids, p, c);
    tr.embeddings = layer_norm(tr.embedding_sum, p.emb_norm_gain, p.emb_norm_bias, c.layer_norm_eps, &tr.emb_norm);

    const T scale = c.scale_attention ? T(1) / std::sqrt(static_cast<T>(c.d_head())) : T(1);
    const auto dh = static_cast<Eigen::Index>(c.d_head());
    const Mat<T>* x = &tr.embeddings;
    tr.layers.resize(p.layers.size());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const auto& lp = p.layers[l];
        auto& lt = tr.layers[l];
        lt.input = *x;
        lt.concat.resize(x->rows(), static_cast<Eigen::Index>(c.d_model));
        for (std::size_t h = 0; h < c.heads; ++h) {
            lt.query.push_back(lt.input * lp.query[h]);
            lt.key.push_back(lt.input * lp.key[h]);
            lt.value.push_back(lt.input * lp.value[h]);
            Mat<T> logits = (lt.query[h] * lt.key[h].transpose()) * scale;
            if (!mask.empty()) {
                for (Eigen::Index j = 0; j < logits.cols(); ++j) {
                    if (mask[static_cast<std::size_t>(j)]) {
                        logits.col(j).setConstant(-std::numeric_limits<T>::infinity());
                    }
                }
            }
            lt.weights.push_back(attention_weights(logits));
            lt.logits.push_back(std::move(logits));
            lt.concat.middleCols(static_cast<Eigen::Index>(h) * dh, dh).noalias() = lt.weights[h] * lt.value[h];
        }
        lt.summary = c.output_projection ? Mat<T>(lt.concat * lp.attn_out) : lt.concat;
        lt.attn_normed = layer_norm(Mat<T>(lt.input + lt.summary), lp.attn_norm_gain, lp.attn_norm_bias,
                                    c.layer_norm_eps, &lt.attn_norm);
        lt.ffn_pre = (lt.attn_normed * lp.w1).rowwise() + lp.b1.row(0);
        lt.ffn_act = lt.ffn_pre.cwiseMax(T(0));
        Mat<T> ffn_out = (lt.ffn_act * lp.w2).rowwise() + lp.b2.row(0);
        Mat<T> next = layer_norm(Mat<T>(lt.attn_normed + ffn_out), lp.ffn_norm_gain, lp.ffn_norm_bias,
                                 c.layer_norm_eps, &lt.ffn_norm);
        if (l + 1 < p.layers.size()) {
            tr.layers[l + 1].input = std::move(next);
            x = &tr.layers[l + 1].input;
        } else {
            tr.output = std::move(next);
            x = &tr.output;
        }
    }
    if (p.layers.empty()) tr.output = tr.embeddings;
    return tr;
}

template <typename T>
struct EncoderGradients {
    EncoderParameters<T> params;
    Mat<T> input_embeddings;  // w.r.t. the pre-norm embedding sums
};

/// Reverse-mode pass over a trace. Gradients accumulate into `grads`, which
/// must be shaped like `p` (e.g. from Model::zeros); returns the gradient
/// with respect to the pre-norm embedding sums.
template <typename T>
Mat<T> backward_into(const ForwardTrace<T>& tr, const Mat<T>& d_output, const EncoderParameters<T>& p,
                     const ModelConfig& c, EncoderParameters<T>& grads) {
    if (d_output.rows() != tr.output.rows() || d_output.cols() != tr.output.cols()) {
        fail(ErrorKind::contract, "output gradient is {}x{}, trace output is {}x{}", d_output.rows(),
             d_output.cols(), tr.output.rows(), tr.output.cols());
    }
    if (tr.layers.size() != p.layers.size()) fail(ErrorKind::contract, "trace and parameters disagree on layer count");
    const T scale = c.scale_attention ? T(1) / std::sqrt(static_cast<T>(c.d_head())) : T(1);
    const auto dh = static_cast<Eigen::Index>(c.d_head());

    Mat<T> dx = d_output;
    for (std::size_t li = p.layers.size(); li-- > 0;) {
        const auto& lp = p.layers[li];
        const auto& lt = tr.layers[li];
        auto& g = grads.layers[li];

        // out = LN2(y + FFN(y))
        Mat<T> dz = layer_norm_backward(dx, lt.ffn_norm, lp.ffn_norm_gain, g.ffn_norm_gain, g.ffn_norm_bias);
        g.w2.noalias() += lt.ffn_act.transpose() * dz;
        g.b2.row(0) += dz.colwise().sum();
        Mat<T> d_pre = (dz * lp.w2.transpose()).cwiseProduct((lt.ffn_pre.array() > T(0)).matrix().template cast<T>());
        g.w1.noalias() += lt.attn_normed.transpose() * d_pre;
        g.b1.row(0) += d_pre.colwise().sum();
        Mat<T> dy = dz;
        dy.noalias() += d_pre * lp.w1.transpose();

        // y = LN1(x + h)
        Mat<T> du = layer_norm_backward(dy, lt.attn_norm, lp.attn_norm_gain, g.attn_norm_gain, g.attn_norm_bias);
        Mat<T> d_in = du;
        Mat<T> d_concat;
        if (c.output_projection) {
            g.attn_out.noalias() += lt.concat.transpose() * du;
            d_concat = du * lp.attn_out.transpose();
        } else {
            d_concat = du;
        }
        for (std::size_t h = 0; h < c.heads; ++h) {
            const Mat<T> ds = d_concat.middleCols(static_cast<Eigen::Index>(h) * dh, dh);
            const Mat<T>& alpha = lt.weights[h];
            const Mat<T> d_alpha = ds * lt.value[h].transpose();
            const Mat<T> dv = alpha.transpose() * ds;
            const auto row_dot = (alpha.array() * d_alpha.array()).rowwise().sum();
            Mat<T> d_logits = (alpha.array() * (d_alpha.array().colwise() - row_dot)).matrix();
            d_logits *= scale;
            const Mat<T> dq = d_logits * lt.key[h];
            const Mat<T> dk = d_logits.transpose() * lt.query[h];
            g.query[h].noalias() += lt.input.transpose() * dq;
            g.key[h].noalias() += lt.input.transpose() * dk;
            g.value[h].noalias() += lt.input.transpose() * dv;
            d_in.noalias() += dq * lp.query[h].transpose();
            d_in.noalias() += dk * lp.key[h].transpose();
            d_in.noalias() += dv * lp.value[h].transpose();
        }
        dx = std::move(d_in);
    }

    Mat<T> d_sum = layer_norm_backward(dx, tr.emb_norm, p.emb_norm_gain, grads.emb_norm_gain, grads.emb_norm_bias);
    for (std::size_t i = 0; i < tr.piece_ids.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        grads.token_emb.row(tr.piece_ids[i]) += d_sum.row(row);
        grads.position_emb.row(row) += d_sum.row(row);
    }
    grads.segment_emb.row(0) += d_sum.colwise().sum();
    return d_sum;
}

template <typename T>
EncoderGradients<T> backward(const ForwardTrace<T>& tr, const Mat<T>& d_output, const EncoderParameters<T>& p,
                             const ModelConfig& c) {
    EncoderGradients<T> out;
    out.params = Model<T>::zeros(c).encoder;
    out.input_embeddings = backward_into(tr, d_output, p, c, out.params);
    return out;
}

}  // namespace kgqa::nn
