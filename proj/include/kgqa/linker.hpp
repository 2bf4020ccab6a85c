#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "kgqa/common.hpp"
#include "kgqa/kgstore.hpp"
#include "kgqa/textproc.hpp"
#include "kgqa/weights.hpp"

namespace kgqa::link {

inline const std::vector<std::string>& default_stop_words() {
    static const std::vector<std::string> words{"the", "of", "a", "in"};
    return words;
}

/// Lowercased word -> sorted set of entity ids whose names contain it.
class InvertedIndex {
public:
    void add(const std::string& word, const std::string& entity) { postings_[word].insert(entity); }

    const std::set<std::string>* find(const std::string& word) const {
        auto it = postings_.find(word);
        return it == postings_.end() ? nullptr : &it->second;
    }

    const std::map<std::string, std::set<std::string>>& postings() const { return postings_; }
    std::size_t word_count() const { return postings_.size(); }

    bool operator==(const InvertedIndex&) const = default;

private:
    std::map<std::string, std::set<std::string>> postings_;
};

inline InvertedIndex build_index(const kg::KnowledgeGraph& graph) {
    InvertedIndex index;
    for (const auto& id : graph.entity_ids()) {
        for (const auto& name : graph.names(id)) {
            for (const auto& w : text::split_words(name)) index.add(w, id);
        }
    }
    return index;
}

inline constexpr char kIndexMagic[4] = {'K', 'G', 'I', 'X'};
inline constexpr std::uint32_t kIndexVersion = 1;

inline void save_index(std::ostream& out, const InvertedIndex& index) {
    using nn::detail::put_le;
    out.write(kIndexMagic, 4);
    put_le<std::uint32_t>(out, kIndexVersion);
    put_le<std::uint64_t>(out, index.word_count());
    auto put_str = [&](const std::string& s) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
        out.write(s.data(), static_cast<std::streamsize>(s.size()));
    };
    for (const auto& [word, ids] : index.postings()) {
        put_str(word);
        put_le<std::uint64_t>(out, ids.size());
        for (const auto& id : ids) put_str(id);
    }
}

inline InvertedIndex load_index(std::istream& in) {
    using nn::detail::get_le;
    char magic[4];
    if (!in.read(magic, 4) || std::string_view(magic, 4) != std::string_view(kIndexMagic, 4)) {
        fail(ErrorKind::format, "bad index magic (expected KGIX)");
    }
    const auto version = get_le<std::uint32_t>(in, "index version");
    if (version != kIndexVersion) fail(ErrorKind::format, "unsupported index version {}", version);
    auto get_str = [&]() {
        const auto n = get_le<std::uint32_t>(in, "string length");
        std::string s(n, '\0');
        if (!in.read(s.data(), n)) fail(ErrorKind::format, "truncated index");
        return s;
    };
    InvertedIndex index;
    const auto words = get_le<std::uint64_t>(in, "word count");
    for (std::uint64_t w = 0; w < words; ++w) {
        const auto word = get_str();
        const auto n = get_le<std::uint64_t>(in, "posting count");
        for (std::uint64_t k = 0; k < n; ++k) index.add(word, get_str());
    }
    return index;
}

namespace detail {

inline std::u32string decode(std::string_view s) {
    std::u32string out;
    std::size_t i = 0;
    while (i < s.size()) out.push_back(text::detail::decode_utf8(s, i));
    return out;
}

inline std::string token_sorted(const std::string& s) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    std::string cur;
    while (i < s.size()) {
        const std::size_t start = i;
        const char32_t c = text::detail::decode_utf8(s, i);
        if (text::detail::is_space(c)) {
            if (!cur.empty()) tokens.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.append(s, start, i - start);
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    std::sort(tokens.begin(), tokens.end());
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

}  // namespace detail

/// Code-point Levenshtein distance (unit insert/delete/substitute).
inline std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
            diag = up;
        }
    }
    return row[b.size()];
}

inline double edit_ratio(const std::string& a, const std::string& b) {
    const auto ua = detail::decode(a);
    const auto ub = detail::decode(b);
    const std::size_t longest = std::max(ua.size(), ub.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(levenshtein(ua, ub)) / static_cast<double>(longest);
}

/// max(edit ratio, edit ratio of whitespace-token-sorted forms), lowercased.
inline double score_similarity(std::string_view a, std::string_view b) {
    const auto la = text::to_lower(a);
    const auto lb = text::to_lower(b);
    if (la.empty() && lb.empty()) return 1.0;
    if (la.empty() || lb.empty()) return 0.0;
    return std::max(edit_ratio(la, lb), edit_ratio(detail::token_sorted(la), detail::token_sorted(lb)));
}

struct Candidate {
    std::string entity;
    std::string matched_name;
    double similarity = 0.0;
    std::size_t out_degree = 0;
    std::size_t in_degree = 0;
};

/// Strict ordering used for candidate ranking.
inline bool candidate_before(const Candidate& a, const Candidate& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.out_degree != b.out_degree) return a.out_degree > b.out_degree;
    return a.entity < b.entity;
}

struct LinkerOptions {
    std::size_t limit = 50;
    std::vector<std::string> stop_words = default_stop_words();
};

/// Entities sharing at least one non-stop word with the span.
inline std::vector<std::string> candidate_pool(const std::string& span_text, const InvertedIndex& index,
                                               const std::vector<std::string>& stop_words) {
    std::set<std::string> pool;
    const std::unordered_set<std::string> stops(stop_words.begin(), stop_words.end());
    for (const auto& w : text::split_words(span_text)) {
        if (stops.count(w)) continue;
        if (const auto* hits = index.find(w)) pool.insert(hits->begin(), hits->end());
    }
    return {pool.begin(), pool.end()};
}

/// Scores one entity: the best similarity over its names (each name
/// normalized with the question's word splitting).
inline Candidate score_entity(const std::string& span_text, const std::string& entity, const kg::KnowledgeGraph& graph) {
    Candidate c;
    c.entity = entity;
    c.similarity = -1.0;
    const auto* rec = graph.find(entity);
    if (rec) {
        c.out_degree = rec->out_degree;
        c.in_degree = rec->in_degree;
        for (const auto& name : rec->names) {
            const double s = score_similarity(span_text, text::normalize(name));
            if (s > c.similarity) {
                c.similarity = s;
                c.matched_name = name;
            }
        }
    }
    if (c.similarity < 0) c.similarity = 0.0;
    return c;
}

inline std::vector<Candidate> generate_candidates(const std::string& span_text, const InvertedIndex& index,
                                                  const kg::KnowledgeGraph& graph, const LinkerOptions& opts = {}) {
    require(opts.limit >= 1, "candidate limit must be >= 1");
    std::vector<Candidate> out;
    for (const auto& id : candidate_pool(span_text, index, opts.stop_words)) {
        out.push_back(score_entity(span_text, id, graph));
    }
    const std::size_t keep = std::min(opts.limit, out.size());
    std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(), candidate_before);
    out.resize(keep);
    return out;
}

/// Fraction of examples whose gold entity is in the top `n` candidates.
inline double recall_at(const std::vector<std::vector<Candidate>>& predictions, const std::vector<std::string>& golds,
                        std::size_t n) {
    require(n >= 1, "recall_at needs N >= 1");
    require(predictions.size() == golds.size(), "recall_at needs aligned inputs");
    if (golds.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        const auto& cands = predictions[i];
        const std::size_t top = std::min(n, cands.size());
        for (std::size_t k = 0; k < top; ++k) {
            if (cands[k].entity == golds[i]) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(golds.size());
}

}  // namespace kgqa::link
