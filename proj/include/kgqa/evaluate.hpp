#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "kgqa/inference.hpp"
#include "kgqa/kgstore.hpp"
#include "kgqa/linker.hpp"
#include "kgqa/metrics.hpp"
#include "kgqa/qanswer.hpp"

namespace kgqa::eval {

struct ComponentScores {
    SpanScores span;
    double relation_accuracy = 0.0;
    std::size_t count = 0;
    std::size_t unsolvable = 0;
};

/// Span and relation predictions straight from the model (no linking).
inline ComponentScores component_metrics(const QAModel& model, const std::vector<kg::QAExample>& data) {
    ComponentScores out;
    std::vector<kg::WordSpan> spans;
    std::vector<std::optional<kg::WordSpan>> golds;
    std::vector<std::string> rel_pred, rel_gold;
    for (const auto& ex : data) {
        const auto inf = infer(model, ex.question);
        spans.push_back(inf.span.span);
        // a gold span on words lost to truncation cannot be matched either
        auto gold = ex.solvable ? ex.gold_span : std::nullopt;
        if (gold && gold->end >= inf.tq.words.size()) gold = std::nullopt;
        golds.push_back(gold);
        out.unsolvable += !ex.solvable;
        const auto best = std::max_element(inf.relation_probs.begin(), inf.relation_probs.end()) - inf.relation_probs.begin();
        rel_pred.push_back(model.relations[static_cast<std::size_t>(best)]);
        rel_gold.push_back(ex.gold_relation);
    }
    out.count = data.size();
    out.span = span_metrics(spans, golds);
    out.relation_accuracy = relation_accuracy(rel_pred, rel_gold);
    return out;
}

inline const std::vector<std::size_t>& default_recall_ranks() {
    static const std::vector<std::size_t> ranks{1, 5, 20, 50, 150};
    return ranks;
}

struct EvalReport {
    SpanScores span;
    double relation_accuracy = 0.0;
    std::map<std::size_t, double> recall;
    double end_to_end_accuracy = 0.0;
    double reranked_relation_accuracy = 0.0;
    double entity_accuracy = 0.0;
    qa::ErrorBreakdown errors;
    std::size_t count = 0;
    std::size_t unsolvable = 0;
};

/// Full pipeline over a dataset: component metrics, entity recall at each
/// rank, end-to-end accuracy after logical-form selection, error taxonomy.
inline EvalReport evaluate(const QAModel& model, const std::vector<kg::QAExample>& data, const link::InvertedIndex& index,
                           const kg::KnowledgeGraph& graph, const link::LinkerOptions& linker = {},
                           const std::vector<std::size_t>& recall_ranks = default_recall_ranks()) {
    EvalReport r;
    r.count = data.size();
    std::vector<kg::WordSpan> spans;
    std::vector<std::optional<kg::WordSpan>> golds;
    std::vector<std::string> rel_pred, rel_gold;
    std::vector<std::vector<link::Candidate>> all_candidates;
    std::vector<std::string> gold_entities;
    std::vector<qa::Prediction> preds, gold_pairs;
    std::vector<std::vector<std::string>> candidate_ids;

    link::LinkerOptions wide = linker;
    std::size_t max_rank = linker.limit;
    for (auto n : recall_ranks) max_rank = std::max(max_rank, n);
    wide.limit = max_rank;

    for (const auto& ex : data) {
        const auto inf = infer(model, ex.question);
        spans.push_back(inf.span.span);
        auto gold = ex.solvable ? ex.gold_span : std::nullopt;
        if (gold && gold->end >= inf.tq.words.size()) gold = std::nullopt;
        golds.push_back(gold);
        r.unsolvable += !ex.solvable;
        const auto best = std::max_element(inf.relation_probs.begin(), inf.relation_probs.end()) - inf.relation_probs.begin();
        rel_pred.push_back(model.relations[static_cast<std::size_t>(best)]);
        rel_gold.push_back(ex.gold_relation);

        auto cands = link::generate_candidates(span_text(inf.tq, inf.span.span), index, graph, wide);
        std::vector<link::Candidate> top(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(std::min(linker.limit, cands.size())));
        const auto forms = qa::select_logical_form(top, inf.relation_probs, model.relations, graph);
        qa::Prediction p;
        if (!forms.empty()) p = {forms.front().entity, forms.front().relation};
        preds.push_back(p);
        gold_pairs.push_back({ex.gold_subject, ex.gold_relation});
        std::vector<std::string> ids;
        for (const auto& c : top) ids.push_back(c.entity);
        candidate_ids.push_back(std::move(ids));
        gold_entities.push_back(ex.gold_subject);
        all_candidates.push_back(std::move(cands));
    }
    r.span = span_metrics(spans, golds);
    r.relation_accuracy = relation_accuracy(rel_pred, rel_gold);
    for (auto n : recall_ranks) r.recall[n] = link::recall_at(all_candidates, gold_entities, n);
    r.errors = qa::categorize_errors(preds, gold_pairs, candidate_ids);
    if (r.count > 0) {
        std::size_t ent = 0, rel = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            ent += preds[i].entity == gold_pairs[i].entity;
            rel += !preds[i].relation.empty() && preds[i].relation == gold_pairs[i].relation;
        }
        const double n = static_cast<double>(r.count);
        r.end_to_end_accuracy = static_cast<double>(r.errors.correct) / n;
        r.entity_accuracy = static_cast<double>(ent) / n;
        r.reranked_relation_accuracy = static_cast<double>(rel) / n;
    }
    return r;
}

}  // namespace kgqa::eval
