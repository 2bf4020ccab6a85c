#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "kgqa/fileio.hpp"
#include "kgqa/inference.hpp"
#include "kgqa/weights.hpp"

namespace kgqa {

inline nlohmann::json config_to_json(const nn::ModelConfig& c) {
    return {{"layers", c.layers},
            {"heads", c.heads},
            {"d_model", c.d_model},
            {"d_ff", c.d_ff},
            {"vocab_size", c.vocab_size},
            {"max_positions", c.max_positions},
            {"num_relations", c.num_relations},
            {"scale_attention", c.scale_attention},
            {"output_projection", c.output_projection},
            {"layer_norm_eps", c.layer_norm_eps}};
}

inline nn::ModelConfig config_from_json(const nlohmann::json& j) {
    nn::ModelConfig c;
    c.layers = j.at("layers").get<std::size_t>();
    c.heads = j.at("heads").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.max_positions = j.at("max_positions").get<std::size_t>();
    c.num_relations = j.at("num_relations").get<std::size_t>();
    c.scale_attention = j.at("scale_attention").get<bool>();
    c.output_projection = j.at("output_projection").get<bool>();
    c.layer_norm_eps = j.at("layer_norm_eps").get<double>();
    c.validate();
    return c;
}

inline std::filesystem::path metadata_path(const std::filesystem::path& weights) {
    return std::filesystem::path(weights.string() + ".json");
}

/// Weights at `path`; config, relation list and vocabulary at `path`.json.
inline void save_qamodel(const QAModel& m, const std::filesystem::path& path) {
    nlohmann::json meta;
    meta["config"] = config_to_json(m.model.config);
    meta["relations"] = m.relations;
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < m.vocab.size(); ++i) tokens.push_back(m.vocab.token(static_cast<int>(i)));
    meta["vocab"] = {{"prefix", m.vocab.prefix()}, {"tokens", tokens}};
    meta["entity_mask_ablation"] = to_string(m.masking);
    meta["max_pieces"] = m.max_pieces;
    nn::save_weights(m.model, path);
    write_file_atomic(metadata_path(path), [&](std::ostream& out) { out << meta.dump(1) << '\n'; });
}

inline QAModel load_qamodel(const std::filesystem::path& path) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file(metadata_path(path)));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, "bad model metadata {}: {}", metadata_path(path).string(), e.what());
    }
    try {
        QAModel m;
        const auto config = config_from_json(meta.at("config"));
        m.vocab = text::Vocabulary(meta.at("vocab").at("tokens").get<std::vector<std::string>>(),
                                   meta.at("vocab").at("prefix").get<std::string>());
        m.relations = meta.at("relations").get<std::vector<std::string>>();
        m.masking = parse_entity_masking(meta.value("entity_mask_ablation", std::string("none")));
        m.max_pieces = meta.value("max_pieces", text::kDefaultMaxPieces);
        if (m.relations.size() != config.num_relations || m.vocab.size() != config.vocab_size) {
            fail(ErrorKind::format, "model metadata disagrees with its config");
        }
        m.model = nn::load_weights<float>(path, config);
        return m;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::format, "bad model metadata {}: {}", metadata_path(path).string(), e.what());
    }
}

}  // namespace kgqa
