#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "kgqa/attention.hpp"
#include "kgqa/checkpoint.hpp"
#include "kgqa/evaluate.hpp"
#include "kgqa/experiment.hpp"
#include "kgqa/kgstore.hpp"
#include "kgqa/linker.hpp"
#include "kgqa/qanswer.hpp"
#include "kgqa/run_config.hpp"
#include "kgqa/toygen.hpp"
#include "kgqa/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kgqa;

namespace {

constexpr int kExitError = 1;
constexpr int kExitNoAnswer = 2;

struct Options {
    std::string config_path;
    std::map<std::string, std::string> overrides;
    std::vector<std::string> sets;
    bool verbose = false;
};

RunConfig resolve(const Options& o) {
    RunConfig c = o.config_path.empty() ? RunConfig{} : RunConfig::load(o.config_path);
    for (const auto& [k, v] : o.overrides) c.set(k, v);
    for (const auto& kv : o.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) fail(ErrorKind::config, "--set expects key=value, got '{}'", kv);
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return c;
}

kg::KnowledgeGraph load_kg(const RunConfig& c) {
    auto g = kg::load_graph(c.path("triples"));
    const auto lex = c.path("lexicon");
    if (fs::exists(lex)) {
        kg::load_lexicon(lex, g);
    } else {
        spdlog::warn("no lexicon at {}; entities have no names and cannot be linked", lex.string());
    }
    return g;
}

std::vector<kg::QAExample> load_split(const RunConfig& c, const std::string& key, const kg::KnowledgeGraph& g) {
    kg::DatasetDiagnostics d;
    auto data = kg::load_dataset(c.path(key), g, &d);
    if (d.unsolvable || d.unknown_relations) {
        spdlog::info("{}: {} examples, {} unsolvable, {} with relations absent from the graph", key, data.size(),
                     d.unsolvable, d.unknown_relations);
    }
    return data;
}

link::InvertedIndex load_or_build_index(const RunConfig& c, const kg::KnowledgeGraph& g) {
    const auto p = c.path("index");
    if (fs::exists(p)) {
        std::ifstream in(p, std::ios::binary);
        return link::load_index(in);
    }
    spdlog::warn("no index at {}; building in memory", p.string());
    return link::build_index(g);
}

fs::path model_path(const RunConfig& c) { return c.path("model"); }

json span_json(const eval::SpanScores& s) {
    return {{"accuracy", s.accuracy}, {"avg_f1", s.avg_f1}, {"dataset_f1", s.dataset_f1}};
}

json report_json(const eval::EvalReport& r) {
    json recall = json::object();
    for (const auto& [n, v] : r.recall) recall["R@" + std::to_string(n)] = v;
    const auto& e = r.errors;
    return {{"count", r.count},
            {"unsolvable", r.unsolvable},
            {"span", span_json(r.span)},
            {"relation_accuracy", r.relation_accuracy},
            {"reranked_relation_accuracy", r.reranked_relation_accuracy},
            {"entity_accuracy", r.entity_accuracy},
            {"recall", recall},
            {"end_to_end_accuracy", r.end_to_end_accuracy},
            {"errors",
             {{"wrong", e.wrong()},
              {"both_wrong", e.both_wrong},
              {"entity_only", e.entity_only},
              {"relation_only", e.relation_only},
              {"retrieval_miss", e.retrieval_miss},
              {"relation_error_given_miss", e.relation_error_given_miss},
              {"relation_error_given_hit", e.relation_error_given_hit},
              {"retrieval_share_of_entity_errors", e.retrieval_share_of_entity_errors}}}};
}

void print(const json& j) { std::cout << j.dump() << std::endl; }

int cmd_gen_toy(const RunConfig& c, const std::string& out) {
    const fs::path dir = out.empty() ? c.data_dir() : fs::path(out);
    const auto corpus = toy::generate(c.toy_config());
    toy::write_corpus(corpus, dir);
    print({{"out", dir.string()},
           {"triples", corpus.triples.size()},
           {"names", corpus.lexicon.size()},
           {"relations", corpus.relation_ids.size()},
           {"train", corpus.train.size()},
           {"dev", corpus.dev.size()},
           {"vocab", corpus.vocab_tokens.size()}});
    return 0;
}

int cmd_build_index(const RunConfig& c) {
    const auto g = load_kg(c);
    const auto idx = link::build_index(g);
    write_file_atomic(c.path("index"), [&](std::ostream& out) { link::save_index(out, idx); });
    print({{"index", c.path("index").string()}, {"words", idx.word_count()}, {"entities", g.entity_count()}});
    return 0;
}

int cmd_train(const RunConfig& c, const std::string& save_init) {
    const auto g = load_kg(c);
    const auto train_data = load_split(c, "train", g);
    std::vector<kg::QAExample> dev;
    if (fs::exists(c.path("dev"))) dev = load_split(c, "dev", g);
    const auto vocab = text::Vocabulary::load(c.path("vocab"));
    const auto tcfg = c.train_config();
    auto qa = train::fresh_model(vocab, kg::relation_vocabulary(train_data), c.model_config(), tcfg.seed, c.masking());
    qa.max_pieces = std::min(c.uint("max_pieces"), qa.model.config.max_positions);
    if (!save_init.empty()) save_qamodel(qa, save_init);

    train::TrainArtifacts art;
    art.checkpoint = model_path(c);
    if (!c.text("metric_log").empty()) art.metric_log = c.path("metric_log");
    art.on_epoch = [](const train::EpochRecord& r) {
        if (r.dev) {
            spdlog::info("epoch {} loss {:.4f} dev span {:.3f} rel {:.3f} ({:.1f}s)", r.epoch, r.loss, r.dev->span.accuracy,
                         r.dev->relation_accuracy, r.seconds);
        } else {
            spdlog::info("epoch {} loss {:.4f} ({:.1f}s)", r.epoch, r.loss, r.seconds);
        }
    };
    const auto result = train::train(std::move(qa), train_data, dev, tcfg, art);
    print({{"model", model_path(c).string()},
           {"best_epoch", result.best_epoch},
           {"steps", result.steps},
           {"skipped_steps", result.skipped_steps},
           {"skipped_examples",
            {{"unsolvable", result.train_set.unsolvable},
             {"unknown_relation", result.train_set.unknown_relation},
             {"span_truncated", result.train_set.span_truncated}}},
           {"final", train::to_json(result.log.back())}});
    return 0;
}

int cmd_eval(const RunConfig& c) {
    const auto g = load_kg(c);
    const auto data = load_split(c, "dev", g);
    const auto qa = load_qamodel(model_path(c));
    const auto idx = load_or_build_index(c, g);
    print(report_json(eval::evaluate(qa, data, idx, g, c.linker_options())));
    return 0;
}

int cmd_answer(const RunConfig& c, const std::string& question) {
    const auto g = load_kg(c);
    const auto qa = load_qamodel(model_path(c));
    const auto idx = load_or_build_index(c, g);
    const auto r = qa::answer(question, qa, idx, g, c.linker_options());
    json out{{"question", r.question}, {"status", qa::to_string(r.status)}};
    if (r.status != qa::AnswerStatus::empty_question) {
        out["span"] = {{"start", r.span.start}, {"end", r.span.end}, {"text", r.span_text}};
    }
    if (r.ok()) {
        out["entity"] = r.entity;
        out["relation"] = r.relation;
        out["objects"] = r.objects;
        json alts = json::array();
        for (const auto& f : r.alternatives) {
            alts.push_back({{"entity", f.entity},
                            {"relation", f.relation},
                            {"similarity", f.similarity},
                            {"relation_prob", f.relation_prob},
                            {"in_degree", f.in_degree}});
        }
        out["alternatives"] = alts;
    } else {
        out["reason"] = qa::to_string(r.status);
    }
    print(out);
    return r.ok() ? 0 : kExitNoAnswer;
}

int cmd_subsample(const RunConfig& c, double fraction, const std::string& out) {
    const auto g = load_kg(c);
    const auto data = load_split(c, "train", g);
    const auto r = train::subsample(data, fraction);
    const fs::path dest = out.empty() ? c.path("train").replace_extension(fmt::format("f{}.tsv", fraction)) : fs::path(out);
    write_file_atomic(dest, [&](std::ostream& os) { kg::write_dataset(os, r.retained); });
    print({{"out", dest.string()},
           {"fraction", fraction},
           {"target", r.target},
           {"retained", r.retained.size()},
           {"relations", kg::relation_vocabulary(r.retained).size()},
           {"zeroed_relations", r.zeroed_relations}});
    return 0;
}

int cmd_limited_data(const RunConfig& c) {
    const auto g = load_kg(c);
    const auto train_data = load_split(c, "train", g);
    const auto dev = load_split(c, "dev", g);
    eval::LimitedDataSetup s;
    s.vocab = text::Vocabulary::load(c.path("vocab"));
    s.model = c.model_config();
    s.train = c.train_config();
    s.masking = c.masking();
    s.results = c.path("results");
    s.on_cell = [](const eval::LimitedDataCell& cell) { print(eval::to_json(cell)); };
    eval::limited_data_run(c.fractions(), train_data, dev, s);
    return 0;
}

// A weight archive without its own metadata borrows the reference model's.
QAModel load_for_attention(const fs::path& p, const QAModel* reference) {
    if (fs::exists(metadata_path(p)) || !reference) return load_qamodel(p);
    QAModel m = *reference;
    m.model = nn::load_weights<float>(p, reference->model.config);
    return m;
}

void write_signature(const QAModel& m, const std::string& question, bool raw, const fs::path& out) {
    const auto tq = text::tokenize(question, m.vocab, m.max_pieces);
    if (tq.words.empty()) fail(ErrorKind::empty_input, "question has no words");
    const auto trace = nn::forward<float>(tq.piece_ids, m.model.encoder, m.model.config);
    auto sig = eval::attention_signature(trace, tq.pieces);
    if (!raw) sig = eval::for_display(sig, eval::special_positions(tq));
    write_file_atomic(out, [&](std::ostream& os) { eval::write_signature_csv(os, sig); });
}

int cmd_attention(const RunConfig& c, const std::string& before, const std::string& after, const std::string& question,
                  const std::string& prefix, bool raw) {
    json out{{"question", question}};
    std::optional<QAModel> after_model;
    if (!after.empty()) after_model = load_qamodel(after);
    const fs::path base = prefix.empty() ? fs::path("attention") : fs::path(prefix);
    if (!before.empty()) {
        const auto m = load_for_attention(before, after_model ? &*after_model : nullptr);
        const auto p = base.string() + ".before.csv";
        write_signature(m, question, raw, p);
        out["before"] = p;
    }
    if (after_model) {
        const auto p = base.string() + ".after.csv";
        write_signature(*after_model, question, raw, p);
        out["after"] = p;
    }
    if (before.empty() && after.empty()) {
        const auto p = base.string() + ".csv";
        write_signature(load_qamodel(model_path(c)), question, raw, p);
        out["signature"] = p;
    }
    print(out);
    return 0;
}

void print_error(const std::string& kind, const std::string& message) {
    std::string flat = message;
    for (auto& ch : flat) {
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    std::cerr << json{{"error", kind}, {"message", flat}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("kgqa");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");

    CLI::App app{"Simple-question answering over a knowledge graph"};
    app.require_subcommand(1);
    app.fallthrough();
    Options opts;
    app.add_option("--config", opts.config_path, "key=value configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", opts.sets, "override one key, key=value (repeatable)");
    app.add_flag("-v,--verbose", opts.verbose, "debug logging");
    for (const auto& k : config_schema()) {
        const std::string name = k.name;
        app.add_option_function<std::string>(
               "--" + name, [&opts, name](const std::string& v) { opts.overrides[name] = v; }, k.help)
            ->group("Config keys");
    }

    std::string out, question, before, after, prefix, save_init;
    double fraction = 1.0;
    bool raw = false;

    auto* gen = app.add_subcommand("gen-toy", "write a synthetic corpus");
    gen->add_option("--out", out, "output directory (default data_dir)");
    auto* index = app.add_subcommand("build-index", "build the entity-name inverted index");
    auto* trn = app.add_subcommand("train", "train a model from scratch");
    trn->add_option("--save-init", save_init, "also save the untrained model here");
    auto* evl = app.add_subcommand("eval", "evaluate a model on the dev split");
    auto* ans = app.add_subcommand("answer", "answer one question (exit 2 on no answer)");
    ans->add_option("question", question, "question text")->required();
    auto* sub = app.add_subcommand("subsample", "write a reduced training split");
    sub->add_option("--fraction", fraction, "fraction to retain")->required();
    sub->add_option("--out", out, "output QA file");
    auto* lim = app.add_subcommand("limited-data", "train and score one model per fraction");
    auto* att = app.add_subcommand("attention", "export attention signatures as CSV");
    att->add_option("--before", before, "weights before training");
    att->add_option("--after", after, "weights after training");
    att->add_option("--question", question, "question text")->required();
    att->add_option("--out", prefix, "output prefix (default: attention)");
    att->add_flag("--raw", raw, "keep special-token columns and skip x100 scaling");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    if (opts.verbose) spdlog::set_level(spdlog::level::debug);

    try {
        const auto c = resolve(opts);
        if (gen->parsed()) return cmd_gen_toy(c, out);
        if (index->parsed()) return cmd_build_index(c);
        if (trn->parsed()) return cmd_train(c, save_init);
        if (evl->parsed()) return cmd_eval(c);
        if (ans->parsed()) return cmd_answer(c, question);
        if (sub->parsed()) return cmd_subsample(c, fraction, out);
        if (lim->parsed()) return cmd_limited_data(c);
        if (att->parsed()) return cmd_attention(c, before, after, question, prefix, raw);
    } catch (const Error& e) {
        print_error(to_string(e.kind()), e.what());
        return kExitError;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return kExitError;
    }
    return kExitError;
}
