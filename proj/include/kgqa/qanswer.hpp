#pragma once

#include <algorithm>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgqa/common.hpp"
#include "kgqa/inference.hpp"
#include "kgqa/kgstore.hpp"
#include "kgqa/linker.hpp"

namespace kgqa::qa {

struct LogicalForm {
    std::string entity;
    std::string relation;
    double similarity = 0.0;
    double relation_prob = 0.0;
    std::size_t in_degree = 0;
};

/// similarity desc, relation probability desc, in-degree desc, entity id asc.
inline bool form_before(const LogicalForm& a, const LogicalForm& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.relation_prob != b.relation_prob) return a.relation_prob > b.relation_prob;
    if (a.in_degree != b.in_degree) return a.in_degree > b.in_degree;
    if (a.entity != b.entity) return a.entity < b.entity;
    return a.relation < b.relation;
}

/// Pairs every candidate with its most probable connected relation and
/// ranks the pairs. Relations outside the model's vocabulary score 0;
/// candidates without outgoing relations are dropped.
inline std::vector<LogicalForm> select_logical_form(const std::vector<link::Candidate>& candidates,
                                                    const std::vector<double>& rel_dist,
                                                    const std::vector<std::string>& relations,
                                                    const kg::KnowledgeGraph& graph) {
    require(rel_dist.size() == relations.size(), "relation distribution does not match the relation vocabulary");
    std::unordered_map<std::string, double> prob;
    for (std::size_t i = 0; i < relations.size(); ++i) prob[relations[i]] = rel_dist[i];

    std::vector<LogicalForm> forms;
    for (const auto& c : candidates) {
        const auto* rec = graph.find(c.entity);
        if (!rec || rec->outgoing_relations.empty()) continue;
        LogicalForm best{c.entity, {}, c.similarity, -1.0, rec->in_degree};
        for (const auto& r : rec->outgoing_relations) {  // sorted; first max wins
            auto it = prob.find(r);
            const double p = it == prob.end() ? 0.0 : it->second;
            if (p > best.relation_prob) {
                best.relation_prob = p;
                best.relation = r;
            }
        }
        forms.push_back(std::move(best));
    }
    std::sort(forms.begin(), forms.end(), form_before);
    return forms;
}

enum class AnswerStatus { ok, no_candidates, no_logical_form, empty_question };

inline const char* to_string(AnswerStatus s) {
    switch (s) {
        case AnswerStatus::ok: return "ok";
        case AnswerStatus::no_candidates: return "no_candidates";
        case AnswerStatus::no_logical_form: return "no_logical_form";
        case AnswerStatus::empty_question: return "empty_question";
    }
    return "unknown";
}

struct AnswerResult {
    AnswerStatus status = AnswerStatus::ok;
    std::string question;
    kg::WordSpan span;
    std::string span_text;
    std::string entity;
    std::string relation;
    std::vector<std::string> objects;
    std::vector<LogicalForm> alternatives;  // top 5, including the winner
    std::vector<link::Candidate> candidates;
    std::vector<double> relation_probs;

    bool ok() const { return status == AnswerStatus::ok; }
};

/// tokenize -> encode -> span -> candidates -> logical form -> lookup.
/// Failures come back as a status, never as an exception.
inline AnswerResult answer(std::string_view question, const QAModel& model, const link::InvertedIndex& index,
                           const kg::KnowledgeGraph& graph, const link::LinkerOptions& linker = {}) {
    AnswerResult out;
    out.question = std::string(question);
    if (text::split_words(question).empty()) {
        out.status = AnswerStatus::empty_question;
        return out;
    }
    const auto inf = infer(model, question);
    out.span = inf.span.span;
    out.span_text = span_text(inf.tq, out.span);
    out.relation_probs = inf.relation_probs;
    out.candidates = link::generate_candidates(out.span_text, index, graph, linker);
    if (out.candidates.empty()) {
        out.status = AnswerStatus::no_candidates;
        return out;
    }
    auto forms = select_logical_form(out.candidates, inf.relation_probs, model.relations, graph);
    if (forms.empty()) {
        out.status = AnswerStatus::no_logical_form;
        return out;
    }
    out.entity = forms.front().entity;
    out.relation = forms.front().relation;
    out.objects = kg::lookup_answers(out.entity, out.relation, graph);
    forms.resize(std::min<std::size_t>(forms.size(), 5));
    out.alternatives = std::move(forms);
    return out;
}

struct ErrorBreakdown {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t both_wrong = 0;
    std::size_t entity_only = 0;
    std::size_t relation_only = 0;
    std::size_t retrieval_miss = 0;         // gold entity absent from candidates
    double relation_error_given_miss = 0;   // among wrong predictions
    double relation_error_given_hit = 0;    // among wrong predictions
    double retrieval_share_of_entity_errors = 0;

    std::size_t wrong() const { return both_wrong + entity_only + relation_only; }
};

struct Prediction {
    std::string entity;  // empty on no-answer
    std::string relation;
};

inline ErrorBreakdown categorize_errors(const std::vector<Prediction>& predictions, const std::vector<Prediction>& golds,
                                        const std::vector<std::vector<std::string>>& candidate_sets) {
    require(predictions.size() == golds.size() && golds.size() == candidate_sets.size(),
            "categorize_errors needs aligned inputs");
    ErrorBreakdown b;
    b.total = golds.size();
    std::size_t wrong_miss = 0, wrong_miss_rel = 0, wrong_hit = 0, wrong_hit_rel = 0, entity_wrong = 0,
                entity_wrong_miss = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        const bool ent_ok = !predictions[i].entity.empty() && predictions[i].entity == golds[i].entity;
        const bool rel_ok = !predictions[i].relation.empty() && predictions[i].relation == golds[i].relation;
        const auto& cands = candidate_sets[i];
        const bool miss = std::find(cands.begin(), cands.end(), golds[i].entity) == cands.end();
        if (ent_ok && rel_ok) {
            ++b.correct;
            continue;
        }
        if (!ent_ok && !rel_ok) ++b.both_wrong;
        else if (!ent_ok) ++b.entity_only;
        else ++b.relation_only;
        if (miss) {
            ++b.retrieval_miss;
            ++wrong_miss;
            wrong_miss_rel += !rel_ok;
        } else {
            ++wrong_hit;
            wrong_hit_rel += !rel_ok;
        }
        if (!ent_ok) {
            ++entity_wrong;
            entity_wrong_miss += miss;
        }
    }
    auto rate = [](std::size_t a, std::size_t n) { return n ? static_cast<double>(a) / static_cast<double>(n) : 0.0; };
    b.relation_error_given_miss = rate(wrong_miss_rel, wrong_miss);
    b.relation_error_given_hit = rate(wrong_hit_rel, wrong_hit);
    b.retrieval_share_of_entity_errors = rate(entity_wrong_miss, entity_wrong);
    return b;
}

}  // namespace kgqa::qa
