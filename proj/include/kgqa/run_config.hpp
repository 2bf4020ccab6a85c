#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kgqa/common.hpp"
#include "kgqa/fileio.hpp"
#include "kgqa/inference.hpp"
#include "kgqa/linker.hpp"
#include "kgqa/model.hpp"
#include "kgqa/toygen.hpp"
#include "kgqa/trainer.hpp"

namespace kgqa {

enum class ValueType { uint, real, boolean, text, list };

struct ConfigKey {
    const char* name;
    ValueType type;
    const char* fallback;
    const char* help;
};

inline const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> keys{
        {"seed", ValueType::uint, "1", "root seed for every random stream"},
        {"data_dir", ValueType::text, "", "directory holding corpus files (default $KGQA_DATA_DIR or .)"},
        {"triples", ValueType::text, "triples.tsv", "triples file, relative to data_dir"},
        {"lexicon", ValueType::text, "lexicon.tsv", "entity names file, relative to data_dir"},
        {"vocab", ValueType::text, "vocab.txt", "WordPiece vocabulary, relative to data_dir"},
        {"train", ValueType::text, "train.tsv", "training questions, relative to data_dir"},
        {"dev", ValueType::text, "dev.tsv", "evaluation questions, relative to data_dir"},
        {"index", ValueType::text, "index.kgix", "inverted index snapshot, relative to data_dir"},
        {"model", ValueType::text, "model.kgqa", "weight archive (metadata in <model>.json)"},
        {"metric_log", ValueType::text, "", "per-epoch JSON lines (empty: none)"},
        {"results", ValueType::text, "limited_data.jsonl", "limited-data results file"},
        {"layers", ValueType::uint, "2", "encoder layers L"},
        {"heads", ValueType::uint, "2", "attention heads per layer M"},
        {"d_model", ValueType::uint, "64", "feature width"},
        {"d_ff", ValueType::uint, "256", "feedforward width"},
        {"max_positions", ValueType::uint, "64", "position table size"},
        {"max_pieces", ValueType::uint, "64", "tokenizer truncation limit"},
        {"scale_attention", ValueType::boolean, "true", "divide logits by sqrt(d_head)"},
        {"output_projection", ValueType::boolean, "true", "d_model x d_model projection after head concat"},
        {"entity_mask_ablation", ValueType::text, "none", "none | attention | token"},
        {"epochs", ValueType::uint, "30", "training epochs"},
        {"batch_size", ValueType::uint, "32", "examples per optimizer step"},
        {"peak_lr", ValueType::real, "0.001", "peak learning rate"},
        {"warmup_fraction", ValueType::real, "0.05", "share of steps spent warming up"},
        {"schedule", ValueType::text, "cosine", "cosine | cosine_restarts"},
        {"restart_cycles", ValueType::uint, "3", "cycles for cosine_restarts"},
        {"beta1", ValueType::real, "0.9", "Adam beta1"},
        {"beta2", ValueType::real, "0.999", "Adam beta2"},
        {"adam_eps", ValueType::real, "1e-8", "Adam epsilon"},
        {"clip_norm", ValueType::real, "1.0", "global gradient norm clip (<= 0 disables)"},
        {"loss_weight_span", ValueType::real, "1.0", "weight of each span cross-entropy term"},
        {"loss_weight_relation", ValueType::real, "1.0", "weight of the relation cross-entropy term"},
        {"candidate_limit", ValueType::uint, "50", "K, candidates kept per question"},
        {"stop_words", ValueType::list, "the,of,a,in", "words that do not seed the candidate pool"},
        {"fractions", ValueType::list, "0.05,0.25,1.0", "limited-data training fractions"},
        {"toy_entities", ValueType::uint, "200", "generated entities"},
        {"toy_relations", ValueType::uint, "20", "generated relations"},
        {"toy_train", ValueType::uint, "2000", "generated training questions"},
        {"toy_dev", ValueType::uint, "400", "generated evaluation questions"},
        {"toy_alias_fraction", ValueType::real, "0.1", "share of entities with an alias"},
    };
    return keys;
}

/// Flat key=value settings validated against config_schema().
class RunConfig {
public:
    RunConfig() {
        for (const auto& k : config_schema()) values_[k.name] = k.fallback;
        if (const char* env = std::getenv("KGQA_DATA_DIR")) values_["data_dir"] = env;
    }

    static RunConfig parse(const std::string& content, const std::string& source = "<config>") {
        RunConfig c;
        const auto lines = split_lines(content);
        for (std::size_t i = 0; i < lines.size(); ++i) {
            std::string_view line = lines[i];
            const auto first = line.find_first_not_of(" \t");
            if (first == std::string_view::npos || line[first] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) fail(ErrorKind::config, "{}:{}: expected key=value", source, i + 1);
            try {
                c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
            } catch (const Error& e) {
                fail(ErrorKind::config, "{}:{}: {}", source, i + 1, e.what());
            }
        }
        return c;
    }

    static RunConfig load(const std::filesystem::path& path) { return parse(read_file(path), path.string()); }

    void set(const std::string& key, const std::string& value) {
        const auto* k = find_key(key);
        if (!k) fail(ErrorKind::config, "unknown config key '{}'", key);
        check(*k, value);
        values_[key] = value;
    }

    const std::string& text(const std::string& key) const { return values_.at(checked(key, ValueType::text)->name); }

    std::size_t uint(const std::string& key) const {
        return parse_uint(values_.at(checked(key, ValueType::uint)->name), key);
    }

    double real(const std::string& key) const { return parse_real(values_.at(checked(key, ValueType::real)->name), key); }

    bool boolean(const std::string& key) const {
        return parse_bool(values_.at(checked(key, ValueType::boolean)->name), key);
    }

    std::vector<std::string> list(const std::string& key) const {
        std::vector<std::string> out;
        std::string_view s = values_.at(checked(key, ValueType::list)->name);
        while (!s.empty()) {
            const auto comma = s.find(',');
            auto item = trim(s.substr(0, comma));
            if (!item.empty()) out.push_back(item);
            if (comma == std::string_view::npos) break;
            s.remove_prefix(comma + 1);
        }
        return out;
    }

    std::filesystem::path data_dir() const {
        const auto& d = values_.at("data_dir");
        return d.empty() ? std::filesystem::path(".") : std::filesystem::path(d);
    }

    /// A file key resolved against data_dir unless absolute.
    std::filesystem::path path(const std::string& key) const {
        std::filesystem::path p = text(key);
        return p.is_absolute() ? p : data_dir() / p;
    }

    nn::ModelConfig model_config() const {
        nn::ModelConfig c;
        c.layers = uint("layers");
        c.heads = uint("heads");
        c.d_model = uint("d_model");
        c.d_ff = uint("d_ff");
        c.max_positions = uint("max_positions");
        c.scale_attention = boolean("scale_attention");
        c.output_projection = boolean("output_projection");
        return c;
    }

    train::TrainConfig train_config() const {
        train::TrainConfig t;
        t.epochs = uint("epochs");
        t.batch_size = uint("batch_size");
        t.peak_lr = real("peak_lr");
        t.warmup_fraction = real("warmup_fraction");
        t.schedule = train::parse_schedule(text("schedule"));
        t.restart_cycles = uint("restart_cycles");
        t.beta1 = real("beta1");
        t.beta2 = real("beta2");
        t.adam_eps = real("adam_eps");
        t.clip_norm = real("clip_norm");
        t.seed = uint("seed");
        t.loss_weights.start_end = real("loss_weight_span");
        t.loss_weights.relation = real("loss_weight_relation");
        t.validate();
        return t;
    }

    link::LinkerOptions linker_options() const {
        link::LinkerOptions o;
        o.limit = uint("candidate_limit");
        o.stop_words = list("stop_words");
        return o;
    }

    EntityMasking masking() const { return parse_entity_masking(text("entity_mask_ablation")); }

    std::vector<double> fractions() const {
        std::vector<double> out;
        for (const auto& f : list("fractions")) {
            const double v = parse_real(f, "fractions");
            if (!(v > 0 && v <= 1)) fail(ErrorKind::config, "fraction {} outside (0, 1]", f);
            out.push_back(v);
        }
        return out;
    }

    toy::ToyConfig toy_config() const {
        toy::ToyConfig t;
        t.seed = uint("seed");
        t.entities = uint("toy_entities");
        t.relations = uint("toy_relations");
        t.train_questions = uint("toy_train");
        t.dev_questions = uint("toy_dev");
        t.alias_fraction = real("toy_alias_fraction");
        return t;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    static std::string trim(std::string_view s) {
        const auto b = s.find_first_not_of(" \t");
        if (b == std::string_view::npos) return {};
        const auto e = s.find_last_not_of(" \t");
        return std::string(s.substr(b, e - b + 1));
    }

    static const ConfigKey* find_key(std::string_view key) {
        for (const auto& k : config_schema()) {
            if (key == k.name) return &k;
        }
        return nullptr;
    }

    static const ConfigKey* checked(const std::string& key, ValueType type) {
        const auto* k = find_key(key);
        if (!k || k->type != type) fail(ErrorKind::contract, "config key '{}' read with the wrong type", key);
        return k;
    }

    static std::size_t parse_uint(std::string_view s, std::string_view key) {
        std::size_t v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
            fail(ErrorKind::config, "'{}' expects a non-negative integer, got '{}'", key, s);
        }
        return v;
    }

    static double parse_real(std::string_view s, std::string_view key) {
        double v = 0;
        const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
        if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
            fail(ErrorKind::config, "'{}' expects a number, got '{}'", key, s);
        }
        return v;
    }

    static bool parse_bool(std::string_view s, std::string_view key) {
        if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "off" || s == "no") return false;
        fail(ErrorKind::config, "'{}' expects true|false, got '{}'", key, s);
    }

    static void check(const ConfigKey& k, const std::string& v) {
        switch (k.type) {
            case ValueType::uint: parse_uint(v, k.name); break;
            case ValueType::real: parse_real(v, k.name); break;
            case ValueType::boolean: parse_bool(v, k.name); break;
            case ValueType::text:
                if (std::string_view(k.name) == "entity_mask_ablation") parse_entity_masking(v);
                if (std::string_view(k.name) == "schedule") train::parse_schedule(v);
                break;
            case ValueType::list: break;
        }
    }

    std::map<std::string, std::string> values_;
};

}  // namespace kgqa
