#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgqa/evaluate.hpp"
#include "kgqa/fileio.hpp"
#include "kgqa/trainer.hpp"

namespace kgqa::eval {

struct LimitedDataCell {
    double fraction = 1.0;
    std::uint64_t seed = 0;
    std::size_t retained = 0;
    std::size_t epochs = 0;
    bool failed = false;
    std::string error;
    ComponentScores scores;
    bool covered = false;  // every training relation kept at least one example
    std::vector<std::string> unseen_relations;
};

inline nlohmann::json to_json(const LimitedDataCell& c) {
    nlohmann::json j{{"fraction", c.fraction}, {"seed", c.seed}};
    if (c.failed) {
        j["failed"] = true;
        j["error"] = c.error;
        return j;
    }
    j["span_acc"] = c.scores.span.accuracy;
    j["avg_f1"] = c.scores.span.avg_f1;
    j["dataset_f1"] = c.scores.span.dataset_f1;
    j["rel_acc"] = c.covered ? nlohmann::json(c.scores.relation_accuracy) : nlohmann::json(nullptr);
    j["covered"] = c.covered;
    j["retained"] = c.retained;
    j["epochs"] = c.epochs;
    return j;
}

/// Epochs for a subsampled run so that total optimizer steps stay close to
/// the full-data budget.
inline std::size_t budget_epochs(std::size_t full_examples, std::size_t kept_examples, std::size_t base_epochs,
                                 std::size_t batch_size) {
    const auto per = [&](std::size_t n) { return (n + batch_size - 1) / batch_size; };
    const double full_steps = static_cast<double>(per(full_examples) * base_epochs);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(full_steps / static_cast<double>(per(kept_examples)))));
}

struct LimitedDataSetup {
    text::Vocabulary vocab;
    nn::ModelConfig model;
    train::TrainConfig train;
    EntityMasking masking = EntityMasking::none;
    std::optional<std::filesystem::path> results;  // appended, one JSON line per cell
    std::function<void(const LimitedDataCell&)> on_cell;
};

/// For each fraction: subsample, train a fresh model, score on the full
/// evaluation set. A failing cell is recorded and the run continues.
inline std::vector<LimitedDataCell> limited_data_run(const std::vector<double>& fractions,
                                                     const std::vector<kg::QAExample>& train_data,
                                                     const std::vector<kg::QAExample>& dev_data,
                                                     const LimitedDataSetup& setup) {
    std::vector<LimitedDataCell> cells;
    const auto all_relations = kg::relation_vocabulary(train_data);
    for (double f : fractions) {
        LimitedDataCell cell;
        cell.fraction = f;
        cell.seed = setup.train.seed;
        try {
            const auto sub = train::subsample(train_data, f);
            cell.retained = sub.retained.size();
            const auto relations = kg::relation_vocabulary(sub.retained);
            const std::set<std::string> kept(relations.begin(), relations.end());
            for (const auto& r : all_relations) {
                if (!kept.count(r)) cell.unseen_relations.push_back(r);
            }
            cell.covered = cell.unseen_relations.empty();
            auto cfg = setup.train;
            cell.epochs = cfg.epochs =
                budget_epochs(train_data.size(), sub.retained.size(), setup.train.epochs, setup.train.batch_size);
            auto qa = train::fresh_model(setup.vocab, relations, setup.model, cfg.seed, setup.masking);
            const auto result = train::train(std::move(qa), sub.retained, dev_data, cfg);
            cell.scores = component_metrics(result.best, dev_data);
        } catch (const Error& e) {
            cell.failed = true;
            cell.error = e.what();
            spdlog::error("limited-data cell {} failed: {}", f, e.what());
        }
        if (setup.results) append_line(*setup.results, to_json(cell).dump());
        if (setup.on_cell) setup.on_cell(cell);
        cells.push_back(std::move(cell));
    }
    return cells;
}

}  // namespace kgqa::eval
