#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "kgqa/common.hpp"
#include "kgqa/kgstore.hpp"

namespace kgqa::eval {

struct SpanScores {
    double accuracy = 0.0;
    double avg_f1 = 0.0;
    double dataset_f1 = 0.0;
};

/// Word-level span metrics. A missing gold span marks an unsolvable example:
/// it scores 0 for accuracy and per-example F1 and adds only its predicted
/// length to the pooled precision denominator.
inline SpanScores span_metrics(const std::vector<kg::WordSpan>& preds, const std::vector<std::optional<kg::WordSpan>>& golds) {
    if (preds.size() != golds.size()) {
        fail(ErrorKind::contract, "span_metrics: {} predictions vs {} golds", preds.size(), golds.size());
    }
    SpanScores s;
    if (preds.empty()) return s;
    double exact = 0, f1_sum = 0;
    std::size_t overlap_sum = 0, pred_sum = 0, gold_sum = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto& p = preds[i];
        pred_sum += p.length();
        if (!golds[i]) continue;
        const auto& g = *golds[i];
        gold_sum += g.length();
        const std::size_t lo = std::max(p.start, g.start);
        const std::size_t hi = std::min(p.end, g.end);
        const std::size_t o = lo <= hi ? hi - lo + 1 : 0;
        overlap_sum += o;
        if (p == g) exact += 1;
        if (o > 0) {
            const double prec = static_cast<double>(o) / static_cast<double>(p.length());
            const double rec = static_cast<double>(o) / static_cast<double>(g.length());
            f1_sum += 2 * prec * rec / (prec + rec);
        }
    }
    const double n = static_cast<double>(preds.size());
    s.accuracy = exact / n;
    s.avg_f1 = f1_sum / n;
    if (overlap_sum > 0) {
        const double prec = static_cast<double>(overlap_sum) / static_cast<double>(pred_sum);
        const double rec = static_cast<double>(overlap_sum) / static_cast<double>(gold_sum);
        s.dataset_f1 = 2 * prec * rec / (prec + rec);
    }
    return s;
}

inline double relation_accuracy(const std::vector<std::string>& preds, const std::vector<std::string>& golds) {
    if (preds.size() != golds.size()) fail(ErrorKind::contract, "relation_accuracy needs aligned inputs");
    if (golds.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) hits += !preds[i].empty() && preds[i] == golds[i];
    return static_cast<double>(hits) / static_cast<double>(golds.size());
}

}  // namespace kgqa::eval
