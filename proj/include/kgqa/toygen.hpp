#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "kgqa/fileio.hpp"
#include "kgqa/kgstore.hpp"
#include "kgqa/rng.hpp"
#include "kgqa/textproc.hpp"

namespace kgqa::toy {

struct ToyConfig {
    std::uint64_t seed = 1;
    std::size_t entities = 200;
    std::size_t relations = 20;
    std::size_t train_questions = 2000;
    std::size_t dev_questions = 400;
    double alias_fraction = 0.1;
    double zipf_exponent = 1.0;
    std::size_t background_triples = 2;  // per entity, on average
};

// One cue word per relation; the cue is the only token that tells relations apart.
inline const std::vector<std::string>& cue_words() {
    static const std::vector<std::string> cues{
        "wrote",     "directed",  "produced",  "composed",   "founded",   "painted",    "designed",
        "invented",  "discovered", "edited",   "published",  "recorded",  "narrated",   "translated",
        "coached",   "managed",   "sculpted",  "photographed", "illustrated", "choreographed", "built",
        "owned",     "sponsored", "hosted",    "created",    "animated",  "arranged",   "conducted",
        "curated",   "developed", "engineered", "financed",  "launched",  "mentored",   "organized",
        "patented",  "scored",    "staged",    "taught",     "voiced"};
    return cues;
}

inline const std::vector<std::string>& templates() {
    // {E} = entity mention, {C} = relation cue
    static const std::vector<std::string> t{"who {C} {E} ?", "what did {E} {C} ?", "what was {C} by {E} ?",
                                            "{E} {C} what ?", "tell me what {E} {C}", "which thing was {C} by {E}"};
    return t;
}

inline const std::vector<std::string>& syllables() {
    static const std::vector<std::string> s = [] {
        std::vector<std::string> out;
        for (const char* c : {"b", "d", "g", "k", "m", "n", "p", "r", "s", "t", "v", "z"}) {
            for (const char* v : {"a", "e", "i", "o", "u"}) out.push_back(std::string(c) + v);
        }
        return out;
    }();
    return s;
}

struct Corpus {
    std::vector<kg::Triple> triples;
    std::vector<std::pair<std::string, std::string>> lexicon;  // id, name
    std::vector<std::string> vocab_tokens;
    std::vector<std::string> relation_ids;
    std::map<std::string, std::string> cue_of;  // relation -> cue word
    std::vector<kg::QAExample> train;           // spans not derived yet
    std::vector<kg::QAExample> dev;

    kg::KnowledgeGraph graph() const {
        kg::KnowledgeGraph g;
        for (const auto& t : triples) g.add(t);
        for (const auto& [id, name] : lexicon) g.add_name(id, name);
        return g;
    }

    text::Vocabulary vocabulary() const { return text::Vocabulary(vocab_tokens); }

    /// Examples with gold spans derived against the graph's names.
    std::vector<kg::QAExample> examples(const std::vector<kg::QAExample>& split, const kg::KnowledgeGraph& g) const {
        std::ostringstream os;
        kg::write_dataset(os, split);
        return kg::parse_dataset(os.str(), g);
    }
};

namespace detail {

inline std::string make_word(std::mt19937_64& rng) {
    const auto& syl = syllables();
    const std::size_t n = 2 + uniform_index(rng, 2);
    std::string w;
    for (std::size_t i = 0; i < n; ++i) w += syl[uniform_index(rng, syl.size())];
    return w;
}

inline std::string make_name(std::mt19937_64& rng) {
    std::string name = make_word(rng);
    if (uniform01(rng) < 0.6) name += " " + make_word(rng);
    return name;
}

inline std::string title_case(std::string s) {
    bool start = true;
    for (auto& c : s) {
        if (start && c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
        start = c == ' ';
    }
    return s;
}

inline std::string fill(const std::string& tpl, const std::string& entity, const std::string& cue) {
    std::string out = tpl;
    out.replace(out.find("{C}"), 3, cue);
    out.replace(out.find("{E}"), 3, entity);
    return out;
}

}  // namespace detail

inline Corpus generate(const ToyConfig& cfg) {
    if (cfg.entities < 2 || cfg.relations < 1 || cfg.train_questions + cfg.dev_questions < 1) {
        fail(ErrorKind::config, "toy corpus needs >= 2 entities, >= 1 relation and >= 1 question");
    }
    if (cfg.relations > cue_words().size()) {
        fail(ErrorKind::config, "toy corpus supports at most {} relations", cue_words().size());
    }
    Corpus c;
    auto names_rng = make_stream(cfg.seed, "data.names");
    auto facts_rng = make_stream(cfg.seed, "data.facts");
    auto q_rng = make_stream(cfg.seed, "data.questions");

    // relations: shuffled cue assignment so frequency rank is not alphabetical
    std::vector<std::string> cues(cue_words().begin(), cue_words().end());
    deterministic_shuffle(cues, names_rng);
    for (std::size_t r = 0; r < cfg.relations; ++r) {
        const std::string id = "toy/" + cues[r];
        c.relation_ids.push_back(id);
        c.cue_of[id] = cues[r];
    }

    // entity names, unique across all names and aliases
    std::unordered_set<std::string> used;
    auto fresh_name = [&] {
        for (;;) {
            auto n = detail::make_name(names_rng);
            if (used.insert(n).second) return n;
        }
    };
    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> names(cfg.entities);
    for (std::size_t e = 0; e < cfg.entities; ++e) {
        ids.push_back("m." + std::to_string(1000 + e));
        names[e].push_back(fresh_name());
        if (uniform01(names_rng) < cfg.alias_fraction) names[e].push_back(fresh_name());
        for (const auto& n : names[e]) c.lexicon.emplace_back(ids[e], detail::title_case(n));
    }

    // Zipfian relation distribution
    std::vector<double> cdf(cfg.relations);
    double z = 0;
    for (std::size_t r = 0; r < cfg.relations; ++r) {
        z += 1.0 / std::pow(static_cast<double>(r + 1), cfg.zipf_exponent);
        cdf[r] = z;
    }
    auto pick_relation = [&](std::mt19937_64& rng) {
        const double u = uniform01(rng) * z;
        return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()) % cfg.relations;
    };

    std::set<std::pair<std::string, std::string>> have;  // (subject, relation)
    std::map<std::pair<std::string, std::string>, std::string> object_of;
    auto add_fact = [&](std::size_t s, std::size_t r) {
        const auto key = std::make_pair(ids[s], c.relation_ids[r]);
        if (have.count(key)) return object_of[key];
        std::size_t o = uniform_index(facts_rng, cfg.entities);
        if (o == s) o = (o + 1) % cfg.entities;
        have.insert(key);
        object_of[key] = ids[o];
        c.triples.push_back({ids[s], c.relation_ids[r], ids[o]});
        return ids[o];
    };
    // background facts give entities varied degrees
    for (std::size_t e = 0; e < cfg.entities; ++e) {
        const std::size_t k = uniform_index(facts_rng, 2 * cfg.background_triples + 1);
        for (std::size_t i = 0; i < k; ++i) add_fact(e, pick_relation(facts_rng));
    }

    const auto& tpls = templates();
    auto make_question = [&]() {
        const std::size_t r = pick_relation(q_rng);
        const std::size_t s = uniform_index(q_rng, cfg.entities);
        const auto& mention = names[s][uniform_index(q_rng, names[s].size())];
        const auto& tpl = tpls[uniform_index(q_rng, tpls.size())];
        kg::QAExample ex;
        ex.gold_subject = ids[s];
        ex.gold_relation = c.relation_ids[r];
        ex.gold_object = add_fact(s, r);
        ex.question = detail::fill(tpl, mention, c.cue_of[ex.gold_relation]);
        return ex;
    };
    for (std::size_t i = 0; i < cfg.train_questions; ++i) c.train.push_back(make_question());
    for (std::size_t i = 0; i < cfg.dev_questions; ++i) c.dev.push_back(make_question());

    // vocabulary: specials, template words, cues, syllables and their continuations
    std::vector<std::string> v{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};
    std::set<std::string> words;
    for (auto t : tpls) {
        for (const char* slot : {"{C}", "{E}"}) t.replace(t.find(slot), 3, " ");
        for (const auto& w : text::split_words(t)) words.insert(w);
    }
    for (std::size_t r = 0; r < cfg.relations; ++r) words.insert(cues[r]);
    for (const auto& w : words) v.push_back(w);
    for (const auto& s : syllables()) {
        if (!words.count(s)) v.push_back(s);
    }
    for (const auto& s : syllables()) v.push_back("##" + s);
    c.vocab_tokens = std::move(v);
    return c;
}

/// triples.tsv, lexicon.tsv, vocab.txt, train.tsv, dev.tsv, relations.tsv
inline void write_corpus(const Corpus& c, const std::filesystem::path& dir) {
    write_file_atomic(dir / "triples.tsv", [&](std::ostream& out) {
        for (const auto& t : c.triples) out << t.subject << '\t' << t.relation << '\t' << t.object << '\n';
    });
    write_file_atomic(dir / "lexicon.tsv", [&](std::ostream& out) {
        for (const auto& [id, name] : c.lexicon) out << id << '\t' << name << '\n';
    });
    write_file_atomic(dir / "vocab.txt", [&](std::ostream& out) { c.vocabulary().save(out); });
    write_file_atomic(dir / "train.tsv", [&](std::ostream& out) { kg::write_dataset(out, c.train); });
    write_file_atomic(dir / "dev.tsv", [&](std::ostream& out) { kg::write_dataset(out, c.dev); });
    write_file_atomic(dir / "relations.tsv", [&](std::ostream& out) {
        for (const auto& r : c.relation_ids) out << r << '\t' << c.cue_of.at(r) << '\n';
    });
}

}  // namespace kgqa::toy
