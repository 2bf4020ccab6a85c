#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kgqa/common.hpp"
#include "kgqa/rng.hpp"

namespace kgqa::nn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
    std::size_t layers = 2;
    std::size_t heads = 2;
    std::size_t d_model = 64;
    std::size_t d_ff = 256;
    std::size_t vocab_size = 0;
    std::size_t max_positions = 64;
    std::size_t num_relations = 0;
    bool scale_attention = true;
    bool output_projection = true;
    double layer_norm_eps = 1e-12;

    std::size_t d_head() const { return d_model / heads; }

    void validate() const {
        if (heads == 0 || d_model == 0 || d_ff == 0 || vocab_size == 0 || max_positions == 0 ||
            num_relations == 0) {
            fail(ErrorKind::config, "model dimensions must all be >= 1");
        }
        if (d_model % heads != 0) {
            fail(ErrorKind::config, "d_model ({}) must be divisible by heads ({})", d_model, heads);
        }
    }

    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct LayerParameters {
    std::vector<Mat<T>> query, key, value;  // per head, d_model x d_head
    Mat<T> attn_out;                        // d_model x d_model
    Mat<T> attn_norm_gain, attn_norm_bias;  // 1 x d_model
    Mat<T> w1, b1, w2, b2;                  // d_model x d_ff, 1 x d_ff, d_ff x d_model, 1 x d_model
    Mat<T> ffn_norm_gain, ffn_norm_bias;
};

template <typename T>
struct EncoderParameters {
    Mat<T> token_emb;     // vocab x d_model
    Mat<T> position_emb;  // max_positions x d_model
    Mat<T> segment_emb;   // 1 x d_model (single sentence type)
    Mat<T> emb_norm_gain, emb_norm_bias;
    std::vector<LayerParameters<T>> layers;
};

template <typename T>
struct HeadParameters {
    Mat<T> start;     // 1 x d_model
    Mat<T> end;       // 1 x d_model
    Mat<T> relation;  // num_relations x d_model
};

/// Encoder plus task heads: everything a checkpoint holds.
template <typename T>
struct Model {
    ModelConfig config;
    EncoderParameters<T> encoder;
    HeadParameters<T> heads;

    /// Calls f(name, tensor, rank) for every tensor in archive order.
    template <typename F>
    void for_each_tensor(F&& f) {
        visit(*this, f);
    }
    template <typename F>
    void for_each_tensor(F&& f) const {
        visit(*this, f);
    }

    template <typename U>
    Model<U> cast() const {
        Model<U> out = Model<U>::zeros(config);
        auto src = tensors();
        auto dst = out.tensors();
        for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<U>();
        return out;
    }

    std::vector<Mat<T>*> tensors() {
        std::vector<Mat<T>*> out;
        for_each_tensor([&](const std::string&, Mat<T>& m, int) { out.push_back(&m); });
        return out;
    }
    std::vector<const Mat<T>*> tensors() const {
        std::vector<const Mat<T>*> out;
        for_each_tensor([&](const std::string&, const Mat<T>& m, int) { out.push_back(&m); });
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto* m : tensors()) n += static_cast<std::size_t>(m->size());
        return n;
    }

    void set_zero() {
        for (auto* m : tensors()) m->setZero();
    }

    static Model zeros(const ModelConfig& c) {
        c.validate();
        Model m;
        m.config = c;
        const auto d = static_cast<Eigen::Index>(c.d_model);
        const auto dh = static_cast<Eigen::Index>(c.d_head());
        const auto ff = static_cast<Eigen::Index>(c.d_ff);
        m.encoder.token_emb = Mat<T>::Zero(static_cast<Eigen::Index>(c.vocab_size), d);
        m.encoder.position_emb = Mat<T>::Zero(static_cast<Eigen::Index>(c.max_positions), d);
        m.encoder.segment_emb = Mat<T>::Zero(1, d);
        m.encoder.emb_norm_gain = Mat<T>::Zero(1, d);
        m.encoder.emb_norm_bias = Mat<T>::Zero(1, d);
        m.encoder.layers.resize(c.layers);
        for (auto& layer : m.encoder.layers) {
            layer.query.assign(c.heads, Mat<T>::Zero(d, dh));
            layer.key.assign(c.heads, Mat<T>::Zero(d, dh));
            layer.value.assign(c.heads, Mat<T>::Zero(d, dh));
            layer.attn_out = Mat<T>::Zero(d, d);
            layer.attn_norm_gain = Mat<T>::Zero(1, d);
            layer.attn_norm_bias = Mat<T>::Zero(1, d);
            layer.w1 = Mat<T>::Zero(d, ff);
            layer.b1 = Mat<T>::Zero(1, ff);
            layer.w2 = Mat<T>::Zero(ff, d);
            layer.b2 = Mat<T>::Zero(1, d);
            layer.ffn_norm_gain = Mat<T>::Zero(1, d);
            layer.ffn_norm_bias = Mat<T>::Zero(1, d);
        }
        m.heads.start = Mat<T>::Zero(1, d);
        m.heads.end = Mat<T>::Zero(1, d);
        m.heads.relation = Mat<T>::Zero(static_cast<Eigen::Index>(c.num_relations), d);
        return m;
    }

    /// Truncated-normal weights (std `stddev`), zero biases, unit norm gains.
    static Model initialize(const ModelConfig& c, std::mt19937_64& rng, double stddev = 0.02) {
        Model m = zeros(c);
        m.for_each_tensor([&](const std::string& name, Mat<T>& t, int) {
            if (is_norm_gain(name)) {
                t.setOnes();
            } else if (is_bias(name)) {
                t.setZero();
            } else {
                for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(truncated_normal(rng, stddev));
            }
        });
        return m;
    }

    static bool is_norm_gain(const std::string& name) { return name.ends_with("norm.gain"); }
    static bool is_bias(const std::string& name) {
        return name.ends_with("norm.bias") || name.ends_with(".b1") || name.ends_with(".b2");
    }

private:
    template <typename Self, typename F>
    static void visit(Self& m, F& f) {
        f(std::string("embeddings.token"), m.encoder.token_emb, 2);
        f(std::string("embeddings.position"), m.encoder.position_emb, 2);
        f(std::string("embeddings.segment"), m.encoder.segment_emb, 1);
        f(std::string("embeddings.norm.gain"), m.encoder.emb_norm_gain, 1);
        f(std::string("embeddings.norm.bias"), m.encoder.emb_norm_bias, 1);
        for (std::size_t l = 0; l < m.encoder.layers.size(); ++l) {
            auto& layer = m.encoder.layers[l];
            const std::string p = "layer." + std::to_string(l) + ".";
            for (std::size_t h = 0; h < layer.query.size(); ++h) {
                const std::string hp = p + "head." + std::to_string(h) + ".";
                f(hp + "query", layer.query[h], 2);
                f(hp + "key", layer.key[h], 2);
                f(hp + "value", layer.value[h], 2);
            }
            f(p + "attention.output", layer.attn_out, 2);
            f(p + "attention.norm.gain", layer.attn_norm_gain, 1);
            f(p + "attention.norm.bias", layer.attn_norm_bias, 1);
            f(p + "ffn.w1", layer.w1, 2);
            f(p + "ffn.b1", layer.b1, 1);
            f(p + "ffn.w2", layer.w2, 2);
            f(p + "ffn.b2", layer.b2, 1);
            f(p + "ffn.norm.gain", layer.ffn_norm_gain, 1);
            f(p + "ffn.norm.bias", layer.ffn_norm_bias, 1);
        }
        f(std::string("head.start"), m.heads.start, 1);
        f(std::string("head.end"), m.heads.end, 1);
        f(std::string("head.rel"), m.heads.relation, 2);
    }
};

}  // namespace kgqa::nn
