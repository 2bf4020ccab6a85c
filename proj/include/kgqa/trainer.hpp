#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kgqa/checkpoint.hpp"
#include "kgqa/encoder.hpp"
#include "kgqa/evaluate.hpp"
#include "kgqa/heads.hpp"
#include "kgqa/inference.hpp"
#include "kgqa/kgstore.hpp"
#include "kgqa/rng.hpp"
#include "kgqa/weights.hpp"

namespace kgqa::train {

enum class Schedule { cosine, cosine_restarts };

inline Schedule parse_schedule(std::string_view s) {
    if (s == "cosine") return Schedule::cosine;
    if (s == "cosine_restarts") return Schedule::cosine_restarts;
    fail(ErrorKind::config, "schedule must be cosine|cosine_restarts, got '{}'", s);
}

inline const char* to_string(Schedule s) { return s == Schedule::cosine ? "cosine" : "cosine_restarts"; }

struct TrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    double peak_lr = 1e-3;
    double warmup_fraction = 0.05;
    Schedule schedule = Schedule::cosine;
    std::size_t restart_cycles = 3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double clip_norm = 1.0;  // <= 0 disables clipping
    std::uint64_t seed = 1;
    nn::LossWeights loss_weights;

    void validate() const {
        if (batch_size < 1) fail(ErrorKind::config, "batch_size must be >= 1");
        if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) fail(ErrorKind::config, "warmup_fraction must be in [0, 1)");
        if (schedule == Schedule::cosine_restarts && restart_cycles < 1) fail(ErrorKind::config, "restart_cycles must be >= 1");
        if (!(peak_lr > 0.0)) fail(ErrorKind::config, "peak_lr must be > 0");
        if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) fail(ErrorKind::config, "Adam betas must be in [0, 1)");
    }
};

inline std::size_t warmup_steps(std::size_t total, const TrainConfig& cfg) {
    const auto tw = static_cast<std::size_t>(std::llround(cfg.warmup_fraction * static_cast<double>(total)));
    return std::min(tw, total - 1);
}

/// Linear warmup to the peak, then cosine decay to 0 at `total` (or
/// `restart_cycles` equal cosine cycles over the same range).
inline double lr_at(std::size_t t, std::size_t total, const TrainConfig& cfg) {
    if (total == 0) fail(ErrorKind::contract, "lr_at needs total steps > 0");
    if (t > total) fail(ErrorKind::contract, "lr_at step {} beyond total {}", t, total);
    const std::size_t tw = warmup_steps(total, cfg);
    if (t < tw) return cfg.peak_lr * static_cast<double>(t) / static_cast<double>(tw);
    const double span = static_cast<double>(total - tw);
    double frac = static_cast<double>(t - tw) / span;
    if (cfg.schedule == Schedule::cosine_restarts && t < total) {
        const double u = frac * static_cast<double>(cfg.restart_cycles);
        frac = u - std::floor(u);
    }
    return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

template <typename T>
struct AdamState {
    nn::Model<T> m, v;
    std::uint64_t step = 0;
    std::size_t skipped = 0;

    static AdamState zeros(const nn::ModelConfig& c) { return {nn::Model<T>::zeros(c), nn::Model<T>::zeros(c), 0, 0}; }
};

/// Bias-corrected Adam over parallel tensor lists; `step` is the count
/// after this update.
template <typename T>
void adam_update(const std::vector<nn::Mat<T>*>& params, const std::vector<const nn::Mat<T>*>& grads,
                 const std::vector<nn::Mat<T>*>& m, const std::vector<nn::Mat<T>*>& v, std::uint64_t step, double lr,
                 const TrainConfig& cfg) {
    require(params.size() == grads.size() && grads.size() == m.size() && m.size() == v.size(),
            "adam_update needs aligned tensor lists");
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    for (std::size_t k = 0; k < params.size(); ++k) {
        require(params[k]->size() == grads[k]->size(), "adam_update shape mismatch");
        T* p = params[k]->data();
        const T* g = grads[k]->data();
        T* mk = m[k]->data();
        T* vk = v[k]->data();
        for (Eigen::Index i = 0; i < params[k]->size(); ++i) {
            mk[i] = b1 * mk[i] + (T(1) - b1) * g[i];
            vk[i] = b2 * vk[i] + (T(1) - b2) * g[i] * g[i];
            const double mh = static_cast<double>(mk[i]) / c1;
            const double vh = static_cast<double>(vk[i]) / c2;
            p[i] -= static_cast<T>(lr * mh / (std::sqrt(vh) + cfg.adam_eps));
        }
    }
}

template <typename T>
double global_norm(const nn::Model<T>& grads) {
    double sq = 0;
    for (const auto* t : grads.tensors()) sq += t->template cast<double>().squaredNorm();
    return std::sqrt(sq);
}

/// One optimizer step. Returns false (and counts the skip) when any
/// gradient entry is non-finite; parameters and moments are then untouched.
template <typename T>
bool adam_step(nn::Model<T>& params, nn::Model<T>& grads, AdamState<T>& state, double lr, const TrainConfig& cfg) {
    const double norm = global_norm(grads);
    if (!std::isfinite(norm)) {
        ++state.skipped;
        return false;
    }
    if (cfg.clip_norm > 0 && norm > cfg.clip_norm) {
        const T s = static_cast<T>(cfg.clip_norm / norm);
        for (auto* t : grads.tensors()) *t *= s;
    }
    ++state.step;
    std::vector<nn::Mat<T>*> p, m, v;
    std::vector<const nn::Mat<T>*> g;
    params.for_each_tensor([&](const std::string&, nn::Mat<T>& t, int) { p.push_back(&t); });
    state.m.for_each_tensor([&](const std::string&, nn::Mat<T>& t, int) { m.push_back(&t); });
    state.v.for_each_tensor([&](const std::string&, nn::Mat<T>& t, int) { v.push_back(&t); });
    for (auto* t : grads.tensors()) g.push_back(t);
    adam_update(p, g, m, v, state.step, lr, cfg);
    return true;
}

/// Optimizer state in the tensor archive format: "m.*", "v.*" plus
/// "adam.counters" = [step, skipped].
template <typename T>
void save_adam(const AdamState<T>& s, const std::filesystem::path& path) {
    if (s.step > (1u << 24)) fail(ErrorKind::contract, "step count too large for the optimizer archive");
    auto tensors = nn::to_tensors(s.m, "m.");
    auto vt = nn::to_tensors(s.v, "v.");
    tensors.insert(tensors.end(), vt.begin(), vt.end());
    tensors.push_back({"adam.counters", {2}, {static_cast<float>(s.step), static_cast<float>(s.skipped)}});
    write_file_atomic(path, [&](std::ostream& out) { nn::write_tensors(out, tensors); });
}

template <typename T>
AdamState<T> load_adam(const std::filesystem::path& path, const nn::ModelConfig& c) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open {}", path.string());
    auto tensors = nn::read_tensors(in);
    std::vector<nn::Tensor> mt, vt;
    std::optional<nn::Tensor> counters;
    for (auto& t : tensors) {
        if (t.name == "adam.counters") counters = t;
        else if (t.name.starts_with("m.")) mt.push_back(t);
        else vt.push_back(t);
    }
    if (!counters || counters->data.size() != 2) fail(ErrorKind::format, "optimizer archive lacks adam.counters");
    AdamState<T> s;
    s.m = nn::from_tensors<T>(mt, c, "m.");
    s.v = nn::from_tensors<T>(vt, c, "v.");
    s.step = static_cast<std::uint64_t>(counters->data[0]);
    s.skipped = static_cast<std::size_t>(counters->data[1]);
    return s;
}

struct SubsampleResult {
    std::vector<kg::QAExample> retained;
    std::size_t target = 0;
    std::vector<std::string> zeroed_relations;
};

inline std::size_t subsample_target(std::size_t n, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) fail(ErrorKind::config, "fraction must be in (0, 1], got {}", fraction);
    const auto t = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    return std::max<std::size_t>(1, std::min(t, n));
}

/// Greedy removal from the currently most frequent relation (ties: smallest
/// id), dropping its latest-indexed example, until the target is reached.
inline SubsampleResult subsample(const std::vector<kg::QAExample>& train, double fraction) {
    SubsampleResult r;
    if (train.empty()) fail(ErrorKind::empty_input, "cannot subsample an empty training set");
    r.target = subsample_target(train.size(), fraction);
    std::map<std::string, std::vector<std::size_t>> by_rel;
    for (std::size_t i = 0; i < train.size(); ++i) by_rel[train[i].gold_relation].push_back(i);
    std::vector<bool> keep(train.size(), true);
    std::size_t left = train.size();
    while (left > r.target) {
        auto best = by_rel.end();
        for (auto it = by_rel.begin(); it != by_rel.end(); ++it) {
            if (best == by_rel.end() || it->second.size() > best->second.size()) best = it;
        }
        keep[best->second.back()] = false;
        best->second.pop_back();
        if (best->second.empty()) r.zeroed_relations.push_back(best->first);
        --left;
    }
    for (std::size_t i = 0; i < train.size(); ++i) {
        if (keep[i]) r.retained.push_back(train[i]);
    }
    if (!r.zeroed_relations.empty()) {
        spdlog::warn("subsample: target {} below relation count; {} relation(s) lost", r.target, r.zeroed_relations.size());
    }
    return r;
}

struct PreparedExample {
    text::TokenizedQuestion tq;
    std::size_t start_piece = 0;
    std::size_t end_piece = 0;
    std::size_t relation = 0;
    kg::WordSpan span;
};

struct PreparedSet {
    std::vector<PreparedExample> examples;
    std::size_t unknown_relation = 0;
    std::size_t unsolvable = 0;
    std::size_t span_truncated = 0;
};

inline PreparedSet prepare(const std::vector<kg::QAExample>& data, const QAModel& qa) {
    PreparedSet out;
    for (const auto& ex : data) {
        const int rel = qa.relation_index(ex.gold_relation);
        if (rel < 0) {
            ++out.unknown_relation;
            continue;
        }
        if (!ex.solvable || !ex.gold_span) {
            ++out.unsolvable;
            continue;
        }
        PreparedExample p;
        p.tq = text::tokenize(ex.question, qa.vocab, qa.max_pieces);
        const auto targets = nn::span_targets(p.tq, *ex.gold_span);
        if (!targets) {
            ++out.span_truncated;
            continue;
        }
        p.start_piece = targets->first;
        p.end_piece = targets->second;
        p.relation = static_cast<std::size_t>(rel);
        p.span = *ex.gold_span;
        out.examples.push_back(std::move(p));
    }
    return out;
}

/// Adds one example's loss gradient into `grads`; returns the loss.
inline double accumulate_example(const QAModel& qa, const PreparedExample& ex, const TrainConfig& cfg,
                                 nn::Model<float>& grads) {
    const auto& model = qa.model;
    const auto w_span = static_cast<float>(cfg.loss_weights.start_end);
    const auto w_rel = static_cast<float>(cfg.loss_weights.relation);
    const auto trace = nn::forward<float>(ex.tq.piece_ids, model.encoder, model.config);
    auto acc = nn::make_loss_accumulator(trace.output, model.heads);
    nn::span_loss_into(trace.output, ex.tq, ex.start_piece, ex.end_piece, model.heads, w_span, acc);
    double loss;
    if (qa.masking == EntityMasking::none) {
        nn::relation_loss_into(trace.output, ex.relation, model.heads, w_rel, acc);
        nn::backward_into(trace, acc.d_output, model.encoder, model.config, grads.encoder);
        loss = acc.loss;
    } else {
        nn::backward_into(trace, acc.d_output, model.encoder, model.config, grads.encoder);
        loss = acc.loss;
        grads.heads.start += acc.d_heads.start;
        grads.heads.end += acc.d_heads.end;
        text::TokenizedQuestion rtq;
        nn::AttentionMask mask;
        relation_view(ex.tq, qa.vocab, qa.masking, ex.span, rtq, mask);
        const auto rtrace = nn::forward<float>(rtq.piece_ids, model.encoder, model.config, mask);
        acc = nn::make_loss_accumulator(rtrace.output, model.heads);
        nn::relation_loss_into(rtrace.output, ex.relation, model.heads, w_rel, acc);
        nn::backward_into(rtrace, acc.d_output, model.encoder, model.config, grads.encoder);
        loss += acc.loss;
        grads.heads.relation += acc.d_heads.relation;
        return loss;
    }
    grads.heads.start += acc.d_heads.start;
    grads.heads.end += acc.d_heads.end;
    grads.heads.relation += acc.d_heads.relation;
    return loss;
}

struct EpochRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double lr = 0;
    double loss = 0;  // mean per-example training loss over the epoch
    std::optional<eval::ComponentScores> dev;
    double seconds = 0;
};

inline nlohmann::json to_json(const EpochRecord& r) {
    nlohmann::json j{{"epoch", r.epoch}, {"step", r.step}, {"lr", r.lr}, {"loss", r.loss}};
    if (r.dev) {
        j["dev_span_acc"] = r.dev->span.accuracy;
        j["dev_avg_f1"] = r.dev->span.avg_f1;
        j["dev_dataset_f1"] = r.dev->span.dataset_f1;
        j["dev_rel_acc"] = r.dev->relation_accuracy;
    }
    return j;
}

struct TrainArtifacts {
    std::optional<std::filesystem::path> metric_log;  // JSON lines, truncated at start
    std::optional<std::filesystem::path> checkpoint;  // best-dev weights (+ .json, .adam)
    std::function<void(const EpochRecord&)> on_epoch;
    std::function<void(std::size_t step, double loss)> on_step;
};

struct TrainResult {
    QAModel best;
    std::size_t best_epoch = 0;
    double best_score = -1;
    std::vector<EpochRecord> log;
    std::size_t steps = 0;
    std::size_t skipped_steps = 0;
    PreparedSet train_set;  // counters only are meaningful after training
};

/// Seeded mini-batch training. The returned model is the epoch with the best
/// dev span accuracy + relation accuracy (the last epoch without dev data).
inline TrainResult train(QAModel qa, const std::vector<kg::QAExample>& train_data,
                         const std::vector<kg::QAExample>& dev_data, const TrainConfig& cfg,
                         const TrainArtifacts& artifacts = {}) {
    cfg.validate();
    if (train_data.empty()) fail(ErrorKind::empty_input, "training set is empty");
    TrainResult result;
    auto prepared = prepare(train_data, qa);
    if (prepared.examples.empty()) {
        fail(ErrorKind::empty_input, "no trainable examples: {} unsolvable, {} unknown relation, {} span truncated",
             prepared.unsolvable, prepared.unknown_relation, prepared.span_truncated);
    }
    if (prepared.unknown_relation + prepared.unsolvable + prepared.span_truncated > 0) {
        spdlog::info("skipping {} unsolvable, {} unknown-relation, {} truncated training examples", prepared.unsolvable,
                     prepared.unknown_relation, prepared.span_truncated);
    }
    const std::size_t n = prepared.examples.size();
    const std::size_t per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total = per_epoch * cfg.epochs;

    auto shuffle_rng = make_stream(cfg.seed, "shuffle");
    auto state = AdamState<float>::zeros(qa.model.config);
    auto grads = nn::Model<float>::zeros(qa.model.config);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (artifacts.metric_log) write_file_atomic(*artifacts.metric_log, [](std::ostream&) {});

    result.best = qa;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        deterministic_shuffle(order, shuffle_rng);
        double loss_sum = 0;
        double last_lr = 0;
        for (std::size_t b = 0; b < n; b += cfg.batch_size) {
            const std::size_t e = std::min(n, b + cfg.batch_size);
            grads.set_zero();
            double batch_loss = 0;
            for (std::size_t k = b; k < e; ++k) batch_loss += accumulate_example(qa, prepared.examples[order[k]], cfg, grads);
            const float inv = 1.0f / static_cast<float>(e - b);
            for (auto* t : grads.tensors()) *t *= inv;
            last_lr = lr_at(step, total, cfg);
            adam_step(qa.model, grads, state, last_lr, cfg);
            loss_sum += batch_loss;
            if (artifacts.on_step) artifacts.on_step(step, batch_loss / static_cast<double>(e - b));
            ++step;
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.step = step;
        rec.lr = last_lr;
        rec.loss = loss_sum / static_cast<double>(n);
        double score = 0;
        if (!dev_data.empty()) {
            rec.dev = eval::component_metrics(qa, dev_data);
            score = rec.dev->span.accuracy + rec.dev->relation_accuracy;
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (dev_data.empty() || score > result.best_score) {
            result.best = qa;
            result.best_epoch = epoch;
            result.best_score = score;
            if (artifacts.checkpoint) {
                save_qamodel(qa, *artifacts.checkpoint);
                save_adam(state, std::filesystem::path(artifacts.checkpoint->string() + ".adam"));
            }
        }
        if (artifacts.metric_log) append_line(*artifacts.metric_log, to_json(rec).dump());
        if (artifacts.on_epoch) artifacts.on_epoch(rec);
        result.log.push_back(std::move(rec));
    }
    result.steps = step;
    result.skipped_steps = state.skipped;
    result.train_set.unknown_relation = prepared.unknown_relation;
    result.train_set.unsolvable = prepared.unsolvable;
    result.train_set.span_truncated = prepared.span_truncated;
    return result;
}

/// Fresh model for a vocabulary and relation list.
inline QAModel fresh_model(const text::Vocabulary& vocab, const std::vector<std::string>& relations,
                           nn::ModelConfig config, std::uint64_t seed, EntityMasking masking = EntityMasking::none) {
    config.vocab_size = vocab.size();
    config.num_relations = relations.size();
    auto rng = make_stream(seed, "init");
    QAModel qa;
    qa.model = nn::Model<float>::initialize(config, rng);
    qa.vocab = vocab;
    qa.relations = relations;
    qa.masking = masking;
    qa.max_pieces = std::min(text::kDefaultMaxPieces, config.max_positions);
    return qa;
}

}  // namespace kgqa::train
