#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "kgqa/common.hpp"
#include "kgqa/fileio.hpp"
#include "kgqa/textproc.hpp"

namespace kgqa::kg {

struct Triple {
    std::string subject;
    std::string relation;
    std::string object;

    bool operator==(const Triple&) const = default;
};

struct EntityRecord {
    std::string id;
    std::vector<std::string> names;
    std::size_t out_degree = 0;
    std::size_t in_degree = 0;
    std::set<std::string> outgoing_relations;
    bool named_by_lexicon = false;
};

/// Objects written as a double-quoted string are literals; anything else is
/// an entity identifier.
inline bool is_literal(std::string_view object) {
    return object.size() >= 2 && object.front() == '"' && object.back() == '"';
}

class KnowledgeGraph {
public:
    void add(Triple t) {
        if (t.subject.empty() || t.relation.empty()) {
            fail(ErrorKind::contract, "triple subject and relation must be non-empty");
        }
        std::string key = t.subject + '\t' + t.relation + '\t' + t.object;
        if (!keys_.insert(std::move(key)).second) return;

        auto& subj = touch(t.subject);
        subj.out_degree += 1;
        subj.outgoing_relations.insert(t.relation);
        if (!is_literal(t.object)) touch(t.object).in_degree += 1;
        relations_.insert(t.relation);
        objects_[t.subject + '\t' + t.relation].push_back(t.object);
        triples_.push_back(std::move(t));
    }

    /// Adds a label/alias. Unknown ids get a zero-degree record (kept so the
    /// linker can still surface them).
    void add_name(const std::string& id, const std::string& name) {
        auto it = entities_.find(id);
        if (it == entities_.end()) {
            spdlog::warn("lexicon entry for entity '{}' which has no triples", id);
            it = entities_.emplace(id, EntityRecord{id, {}, 0, 0, {}, false}).first;
            order_.push_back(id);
        }
        auto& rec = it->second;
        if (!rec.named_by_lexicon) {
            rec.names.clear();
            rec.named_by_lexicon = true;
        }
        rec.names.push_back(name);
    }

    const std::vector<Triple>& triples() const { return triples_; }
    const std::set<std::string>& relations() const { return relations_; }
    std::size_t entity_count() const { return entities_.size(); }

    /// Entity ids in first-seen order.
    const std::vector<std::string>& entity_ids() const { return order_; }

    const EntityRecord* find(const std::string& id) const {
        auto it = entities_.find(id);
        return it == entities_.end() ? nullptr : &it->second;
    }

    const EntityRecord& entity(const std::string& id) const {
        const auto* rec = find(id);
        if (!rec) fail(ErrorKind::contract, "unknown entity '{}'", id);
        return *rec;
    }

    std::size_t in_degree(const std::string& id) const {
        const auto* r = find(id);
        return r ? r->in_degree : 0;
    }
    std::size_t out_degree(const std::string& id) const {
        const auto* r = find(id);
        return r ? r->out_degree : 0;
    }

    const std::vector<std::string>& names(const std::string& id) const { return entity(id).names; }

    std::vector<std::string> objects(const std::string& subject, const std::string& relation) const {
        auto it = objects_.find(subject + '\t' + relation);
        return it == objects_.end() ? std::vector<std::string>{} : it->second;
    }

private:
    EntityRecord& touch(const std::string& id) {
        auto it = entities_.find(id);
        if (it == entities_.end()) {
            it = entities_.emplace(id, EntityRecord{id, {id}, 0, 0, {}, false}).first;
            order_.push_back(id);
        }
        return it->second;
    }

    std::vector<Triple> triples_;
    std::unordered_set<std::string> keys_;
    std::unordered_map<std::string, EntityRecord> entities_;
    std::vector<std::string> order_;
    std::set<std::string> relations_;
    std::unordered_map<std::string, std::vector<std::string>> objects_;
};

inline KnowledgeGraph parse_graph(const std::string& content, const std::string& source = "<memory>") {
    KnowledgeGraph g;
    const auto lines = split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto cols = split_tabs(lines[i]);
        if (cols.size() != 3) {
            fail(ErrorKind::parse, "{}:{}: expected 3 tab-separated columns, found {}", source, i + 1,
                 cols.size());
        }
        if (cols[0].empty() || cols[1].empty()) {
            fail(ErrorKind::parse, "{}:{}: empty subject or relation", source, i + 1);
        }
        g.add(Triple{std::move(cols[0]), std::move(cols[1]), std::move(cols[2])});
    }
    if (g.triples().empty()) fail(ErrorKind::empty_input, "{}: knowledge graph is empty", source);
    return g;
}

inline KnowledgeGraph load_graph(const std::filesystem::path& triples_path) {
    return parse_graph(read_file(triples_path), triples_path.string());
}

inline void parse_lexicon(const std::string& content, KnowledgeGraph& graph,
                          const std::string& source = "<memory>") {
    const auto lines = split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto cols = split_tabs(lines[i]);
        if (cols.size() != 2 || cols[0].empty()) {
            fail(ErrorKind::parse, "{}:{}: expected 2 tab-separated columns (id, name)", source, i + 1);
        }
        graph.add_name(cols[0], cols[1]);
    }
}

inline void load_lexicon(const std::filesystem::path& labels_path, KnowledgeGraph& graph) {
    parse_lexicon(read_file(labels_path), graph, labels_path.string());
}

inline std::vector<std::string> lookup_answers(const std::string& entity, const std::string& relation,
                                               const KnowledgeGraph& graph) {
    return graph.objects(entity, relation);
}

struct WordSpan {
    std::size_t start = 0;
    std::size_t end = 0;  // inclusive

    std::size_t length() const { return end - start + 1; }
    bool operator==(const WordSpan&) const = default;
};

struct QAExample {
    std::string question;
    std::string gold_subject;
    std::string gold_relation;
    std::string gold_object;
    std::optional<WordSpan> gold_span;
    bool solvable = false;
};

/// Longest contiguous run of question words equal (case-insensitively) to a
/// contiguous run of some name's words. Ties keep the leftmost question
/// position.
inline std::optional<WordSpan> derive_span(const std::vector<std::string>& question_words,
                                           const std::vector<std::string>& names) {
    std::optional<WordSpan> best;
    for (const auto& name : names) {
        const auto name_words = text::split_words(name);
        const std::size_t n = question_words.size();
        const std::size_t m = name_words.size();
        // run[i][j]: common run length ending at question word i and name word j
        std::vector<std::size_t> prev(m + 1, 0), cur(m + 1, 0);
        for (std::size_t i = 1; i <= n; ++i) {
            for (std::size_t j = 1; j <= m; ++j) {
                cur[j] = question_words[i - 1] == name_words[j - 1] ? prev[j - 1] + 1 : 0;
                if (cur[j] == 0) continue;
                WordSpan cand{i - cur[j], i - 1};
                if (!best || cand.length() > best->length() ||
                    (cand.length() == best->length() && cand.start < best->start)) {
                    best = cand;
                }
            }
            std::swap(prev, cur);
            std::fill(cur.begin(), cur.end(), 0);
        }
    }
    return best;
}

struct DatasetDiagnostics {
    std::size_t unknown_relations = 0;
    std::size_t unsolvable = 0;
};

inline std::vector<QAExample> parse_dataset(const std::string& content, const KnowledgeGraph& graph,
                                            DatasetDiagnostics* diag = nullptr,
                                            const std::string& source = "<memory>") {
    std::vector<QAExample> out;
    DatasetDiagnostics local;
    const auto lines = split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        auto cols = split_tabs(lines[i]);
        if (cols.size() != 4) {
            fail(ErrorKind::parse, "{}:{}: expected 4 tab-separated columns, found {}", source, i + 1,
                 cols.size());
        }
        QAExample ex;
        ex.gold_subject = std::move(cols[0]);
        ex.gold_relation = std::move(cols[1]);
        ex.gold_object = std::move(cols[2]);
        ex.question = std::move(cols[3]);
        if (!graph.relations().count(ex.gold_relation)) {
            ++local.unknown_relations;
            spdlog::debug("{}:{}: relation '{}' not in graph", source, i + 1, ex.gold_relation);
        }
        const auto words = text::split_words(ex.question);
        const auto* rec = graph.find(ex.gold_subject);
        const std::vector<std::string> fallback{ex.gold_subject};
        ex.gold_span = derive_span(words, rec ? rec->names : fallback);
        ex.solvable = ex.gold_span.has_value();
        if (!ex.solvable) ++local.unsolvable;
        out.push_back(std::move(ex));
    }
    if (diag) *diag = local;
    return out;
}

inline std::vector<QAExample> load_dataset(const std::filesystem::path& qa_path, const KnowledgeGraph& graph,
                                           DatasetDiagnostics* diag = nullptr) {
    return parse_dataset(read_file(qa_path), graph, diag, qa_path.string());
}

inline void write_dataset(std::ostream& out, const std::vector<QAExample>& examples) {
    for (const auto& ex : examples) {
        out << ex.gold_subject << '\t' << ex.gold_relation << '\t' << ex.gold_object << '\t' << ex.question
            << '\n';
    }
}

inline void write_graph(std::ostream& out, const KnowledgeGraph& graph) {
    for (const auto& t : graph.triples()) out << t.subject << '\t' << t.relation << '\t' << t.object << '\n';
}

/// Sorted relation vocabulary of a training split.
inline std::vector<std::string> relation_vocabulary(const std::vector<QAExample>& train) {
    std::set<std::string> rels;
    for (const auto& ex : train) rels.insert(ex.gold_relation);
    return {rels.begin(), rels.end()};
}

}  // namespace kgqa::kg
