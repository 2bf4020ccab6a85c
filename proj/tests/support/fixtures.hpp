#pragma once

#include <string>
#include <vector>

#include "kgqa/model.hpp"
#include "kgqa/rng.hpp"
#include "kgqa/textproc.hpp"

namespace kgqa::testing {

inline text::Vocabulary tiny_vocab() {
    return text::Vocabulary({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "what", "songs", "have", "no", "##buo",
                             "u", "##ema", "##tsu", "produced", "who", "wrote", "michael", "crichton", "born",
                             "where", "was", "?"});
}

inline nn::ModelConfig small_config(std::size_t vocab_size, std::size_t relations = 3) {
    nn::ModelConfig c;
    c.layers = 2;
    c.heads = 2;
    c.d_model = 8;
    c.d_ff = 16;
    c.vocab_size = vocab_size;
    c.max_positions = 16;
    c.num_relations = relations;
    return c;
}

template <typename T>
nn::Model<T> random_model(const nn::ModelConfig& c, std::uint64_t seed, double stddev) {
    auto rng = make_stream(seed, "test-init");
    auto m = nn::Model<T>::initialize(c, rng, stddev);
    // give norm gains/biases non-trivial values so their gradients are exercised
    m.for_each_tensor([&](const std::string& name, nn::Mat<T>& t, int) {
        if (name.find("norm") != std::string::npos) {
            for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += static_cast<T>(truncated_normal(rng, 0.1));
        }
    });
    return m;
}

template <typename T>
nn::Mat<T> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double stddev = 1.0) {
    nn::Mat<T> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(standard_normal(rng) * stddev);
    return m;
}

}  // namespace kgqa::testing
