#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "kgqa/encoder.hpp"
#include "kgqa/textproc.hpp"

namespace kgqa::eval {

/// Mean of all L*M attention matrices of one forward pass.
struct AttentionSignature {
    nn::Mat<double> beta;
    std::vector<std::string> tokens;
    bool specials_zeroed = false;
    double scale = 1.0;
};

template <typename T>
AttentionSignature attention_signature(const nn::ForwardTrace<T>& trace, const std::vector<std::string>& tokens = {}) {
    const auto n = static_cast<Eigen::Index>(trace.length());
    AttentionSignature sig;
    sig.beta = nn::Mat<double>::Zero(n, n);
    std::size_t count = 0;
    for (const auto& layer : trace.layers) {
        for (const auto& alpha : layer.weights) {
            sig.beta += alpha.template cast<double>();
            ++count;
        }
    }
    if (count > 0) sig.beta /= static_cast<double>(count);
    sig.tokens = tokens;
    return sig;
}

/// Display form: zero the columns (attention into) of the given special
/// positions and multiply by `scale`.
inline AttentionSignature for_display(AttentionSignature sig, const std::vector<std::size_t>& special_positions,
                                      double scale = 100.0) {
    for (auto p : special_positions) sig.beta.col(static_cast<Eigen::Index>(p)).setZero();
    sig.beta *= scale;
    sig.specials_zeroed = true;
    sig.scale = scale;
    return sig;
}

inline std::vector<std::size_t> special_positions(const text::TokenizedQuestion& tq) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < tq.size(); ++i) {
        if (tq.is_special(i)) out.push_back(i);
    }
    return out;
}

/// Row of [CLS] (position 0) with special columns zeroed, times 100.
inline std::vector<double> cls_attention_row(const AttentionSignature& raw, const std::vector<std::size_t>& specials) {
    const auto shown = for_display(raw, specials, 100.0);
    std::vector<double> out(static_cast<std::size_t>(shown.beta.cols()));
    for (Eigen::Index j = 0; j < shown.beta.cols(); ++j) out[static_cast<std::size_t>(j)] = shown.beta(0, j);
    return out;
}

template <typename T>
std::vector<double> cls_attention_row(const nn::ForwardTrace<T>& trace, const text::TokenizedQuestion& tq) {
    return cls_attention_row(attention_signature(trace, tq.pieces), special_positions(tq));
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace detail

/// Header row of token labels, then one row per query position.
inline void write_signature_csv(std::ostream& out, const AttentionSignature& sig) {
    out << "token";
    for (const auto& t : sig.tokens) out << ',' << detail::csv_field(t);
    out << '\n';
    char buf[64];
    for (Eigen::Index i = 0; i < sig.beta.rows(); ++i) {
        out << detail::csv_field(static_cast<std::size_t>(i) < sig.tokens.size() ? sig.tokens[static_cast<std::size_t>(i)]
                                                                              : std::to_string(i));
        for (Eigen::Index j = 0; j < sig.beta.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.6f", sig.beta(i, j));
            out << ',' << buf;
        }
        out << '\n';
    }
}

}  // namespace kgqa::eval
