#ifndef GRAMINSPECT_CLI_HPP
#define GRAMINSPECT_CLI_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "graminspect/checkpoint.hpp"
#include "graminspect/config.hpp"
#include "graminspect/corpus.hpp"
#include "graminspect/ensemble.hpp"
#include "graminspect/eval.hpp"
#include "graminspect/graphs.hpp"
#include "graminspect/synth.hpp"
#include "graminspect/tagger.hpp"

namespace graminspect::cli {

// Exit codes: 0 success, 2 usage error, 3 input parse failure, 4 numeric
// failure, 5 integrity failure, 1 internal error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitParse = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitIntegrity = 5;

inline const char* usage_text() {
    return
        "usage: graminspect <command> [--key value]... [--config FILE] [--set key=value]\n"
        "\n"
        "commands:\n"
        "  train      train a tagger        (--train --out; variant a: --dep,\n"
        "             b: --frozen, c: --lexicon; optional --val [--val-dep|--val-frozen])\n"
        "  predict    decode a corpus       (--model --input --out + side inputs)\n"
        "  ensemble   three-stage vote      (--models manifest.tsv --out\n"
        "             [--theta1 --theta2 --theta3])\n"
        "  tune       grid-search thetas    (--models --gold --out [--objective])\n"
        "  evaluate   three-level metrics   (--gold --pred [--out])\n"
        "  graph      dump a char graph     (--input --out with --dep or --lexicon)\n"
        "  farm       train k seeds + manifest (--train --input --out-dir\n"
        "             [--farm-models k])\n"
        "  synth      generate the synthetic corpus (--out-dir)\n"
        "\n"
        "Flags map onto config keys ('-' becomes '_'); the config file is applied\n"
        "first, then flags, so flags always win. Every artifact gets a .runlog\n"
        "sidecar with the resolved config, seed and input checksums.\n";
}

namespace detail {

inline std::uint64_t file_checksum(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("cannot open input for checksum: " + path);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return fnv1a64(bytes);
}

inline void write_run_log(const std::string& artifact, const std::string& command,
                          const RunConfig& cfg,
                          const std::vector<std::string>& inputs,
                          const std::vector<std::string>& outputs) {
    std::ofstream os(artifact + ".runlog", std::ios::binary);
    if (!os) throw ParseError("cannot write run log for " + artifact);
    os << "tool " << kToolVersion << "\n";
    os << "command " << command << "\n";
    os << "seed " << cfg.train.seed << "\n";
    for (const std::string& in : inputs)
        os << "input " << in << " " << graminspect::detail::hex64(file_checksum(in)) << "\n";
    for (const std::string& out : outputs) os << "output " << out << "\n";
    os << "config-begin\n" << dump_config(cfg) << "config-end\n";
}

struct ParsedArgs {
    std::string command;
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
    bool help = false;
};

inline ParsedArgs parse_args(const std::vector<std::string>& args) {
    ParsedArgs out;
    if (args.empty()) throw UsageError("no command given");
    out.command = args[0];
    if (out.command == "--help" || out.command == "-h" || out.command == "help") {
        out.help = true;
        return out;
    }
    for (std::size_t i = 1; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--help" || a == "-h") {
            out.help = true;
            return out;
        }
        if (a.rfind("--", 0) != 0) throw UsageError("unexpected argument '" + a + "'");
        if (i + 1 >= args.size()) throw UsageError("flag '" + a + "' needs a value");
        const std::string value = args[++i];
        std::string key = a.substr(2);
        for (char& c : key)
            if (c == '-') c = '_';
        if (key == "config") {
            if (!out.config_path.empty()) throw UsageError("--config given twice");
            out.config_path = value;
        } else if (key == "set") {
            const std::size_t eq = value.find('=');
            if (eq == std::string::npos)
                throw UsageError("--set expects key=value, got '" + value + "'");
            out.overrides.emplace_back(value.substr(0, eq), value.substr(eq + 1));
        } else {
            out.overrides.emplace_back(key, value);
        }
    }
    return out;
}

inline std::vector<TaggerInput> build_inputs(ModelParams& params,
                                             const std::vector<Sentence>& sentences,
                                             const std::vector<DependencyParse>* parses,
                                             const Lexicon* lexicon,
                                             const FrozenEmbeddingTable* frozen,
                                             bool with_labels) {
    if (parses && parses->size() != sentences.size())
        throw ParseError("dependency file has " + std::to_string(parses->size()) +
                         " parses for " + std::to_string(sentences.size()) + " sentences");
    std::vector<TaggerInput> inputs;
    inputs.reserve(sentences.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        inputs.push_back(make_tagger_input(sentences[i], params,
                                           parses ? &(*parses)[i] : nullptr, lexicon,
                                           frozen, with_labels));
    }
    return inputs;
}

// Variant-specific side inputs for one corpus, keyed by dep/frozen/lexicon
// config paths.
struct SideInputs {
    std::optional<std::vector<DependencyParse>> parses;
    std::optional<Lexicon> lexicon;
    std::optional<FrozenEmbeddingTable> frozen;
    std::vector<std::string> files;
};

inline SideInputs load_side_inputs(Variant variant, const RunConfig& cfg,
                                   const std::string& dep_key,
                                   const std::string& frozen_key) {
    SideInputs side;
    switch (variant) {
        case Variant::A: {
            const std::string p = cfg.require_path(dep_key);
            side.parses = read_dependency_file(p);
            side.files.push_back(p);
            break;
        }
        case Variant::B: {
            const std::string p = cfg.require_path(frozen_key);
            side.frozen = read_frozen_table(p);
            side.files.push_back(p);
            break;
        }
        case Variant::C: {
            const std::string p = cfg.require_path("lexicon");
            side.lexicon = read_lexicon(p);
            side.files.push_back(p);
            break;
        }
    }
    return side;
}

inline std::string metrics_line(const EpochLog& log) {
    char buf[160];
    if (log.has_validation) {
        std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.4f\t%.4f\t%.4f", log.epoch,
                      log.mean_loss, log.val_detection_f1, log.val_identification_f1,
                      log.val_position_f1);
    } else {
        std::snprintf(buf, sizeof(buf), "%d\t%.6f", log.epoch, log.mean_loss);
    }
    return buf;
}

// ---------------------------------------------------------------------------

inline int cmd_train(const RunConfig& cfg_in, std::ostream& out) {
    RunConfig cfg = cfg_in;
    const std::string train_path = cfg.require_path("train");
    const std::string out_path = cfg.require_path("out");
    const std::string metrics_path =
        cfg.path("metrics").empty() ? out_path + ".metrics.tsv" : cfg.path("metrics");

    const std::vector<Sentence> train_corpus = read_corpus(train_path);
    SideInputs side = load_side_inputs(cfg.model.variant, cfg, "dep", "frozen");
    if (cfg.model.variant == Variant::B && cfg.model.frozen_width == 0)
        cfg.model.frozen_width = side.frozen->width;

    ModelParams params;
    params.config = cfg.model;
    params.vocab = Vocabulary::build(train_corpus);
    Rng init_rng(cfg.train.seed);
    params.init(init_rng);

    std::vector<TaggerInput> train_inputs = build_inputs(
        params, train_corpus,
        side.parses ? &*side.parses : nullptr,
        side.lexicon ? &*side.lexicon : nullptr,
        side.frozen ? &*side.frozen : nullptr, true);

    std::vector<std::string> input_files = {train_path};
    for (const auto& f : side.files) input_files.push_back(f);

    std::optional<std::vector<Sentence>> val_corpus;
    std::optional<std::vector<TaggerInput>> val_inputs;
    if (!cfg.path("val").empty()) {
        val_corpus = read_corpus(cfg.path("val"));
        input_files.push_back(cfg.path("val"));
        SideInputs vside = load_side_inputs(cfg.model.variant, cfg, "val_dep", "val_frozen");
        if (cfg.model.variant == Variant::C) vside.lexicon = side.lexicon;
        val_inputs = build_inputs(params, *val_corpus,
                                  vside.parses ? &*vside.parses : nullptr,
                                  vside.lexicon ? &*vside.lexicon : nullptr,
                                  vside.frozen ? &*vside.frozen : nullptr, false);
        for (const auto& f : vside.files) input_files.push_back(f);
    }

    ValMetricsFn metrics_fn;
    if (val_corpus) {
        metrics_fn = [&](const PredictionSet& preds, EpochLog& log) {
            const EvalReport r = evaluate(preds, *val_corpus);
            log.val_detection_f1 = r.detection_f1();
            log.val_identification_f1 = r.identification_f1();
            log.val_position_f1 = r.position_f1();
        };
    }

    const std::vector<EpochLog> logs =
        train(params, train_inputs, cfg.train,
              val_inputs ? &*val_inputs : nullptr, metrics_fn,
              [&](const EpochLog& log) { out << metrics_line(log) << "\n"; });

    save_checkpoint(params, out_path, cfg.train.seed, cfg.train.epochs);
    std::ofstream ms(metrics_path, std::ios::binary);
    if (!ms) throw ParseError("cannot write metrics log: " + metrics_path);
    ms << (logs.empty() || !logs[0].has_validation
               ? "epoch\tmean_loss\n"
               : "epoch\tmean_loss\tval_detection_f1\tval_identification_f1\tval_position_f1\n");
    for (const EpochLog& log : logs) ms << metrics_line(log) << "\n";

    write_run_log(out_path, "train", cfg, input_files, {out_path, metrics_path});
    return kExitOk;
}

inline int cmd_predict(const RunConfig& cfg_in, std::ostream& out) {
    RunConfig cfg = cfg_in;
    const std::string model_path = cfg.require_path("model");
    const std::string input_path = cfg.require_path("input");
    const std::string out_path = cfg.require_path("out");

    LoadedCheckpoint ckpt = load_checkpoint(model_path);
    // An explicit --variant that disagrees with the checkpoint is the
    // fingerprint-rejection case.
    if (cfg_in.explicit_keys.count("variant") &&
        cfg_in.model.variant != ckpt.params.config.variant)
        throw IntegrityError("checkpoint " + model_path + " holds a variant-" +
                             variant_name(ckpt.params.config.variant) +
                             " model, but variant " + variant_name(cfg_in.model.variant) +
                             " was requested");
    cfg.model = ckpt.params.config;

    const std::vector<Sentence> corpus = read_corpus(input_path);
    SideInputs side = load_side_inputs(cfg.model.variant, cfg, "dep", "frozen");
    std::vector<TaggerInput> inputs = build_inputs(
        ckpt.params, corpus, side.parses ? &*side.parses : nullptr,
        side.lexicon ? &*side.lexicon : nullptr,
        side.frozen ? &*side.frozen : nullptr, false);

    const PredictionSet preds = predict(ckpt.params, inputs, model_path);
    write_predictions(preds, out_path);
    out << "wrote " << out_path << " (" << preds.by_sentence.size() << " sentences)\n";

    std::vector<std::string> input_files = {model_path, input_path};
    for (const auto& f : side.files) input_files.push_back(f);
    write_run_log(out_path, "predict", cfg, input_files, {out_path});
    return kExitOk;
}

inline int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
    const std::string gold_path = cfg.require_path("gold");
    const std::string pred_path = cfg.require_path("pred");
    const std::vector<Sentence> gold = read_corpus(gold_path);
    const PredictionSet preds = read_predictions(pred_path);
    const EvalReport report = evaluate(preds, gold);
    out << render_report_table({{pred_path, report}});
    if (!cfg.path("out").empty()) {
        std::ofstream os(cfg.path("out"), std::ios::binary);
        if (!os) throw ParseError("cannot write report: " + cfg.path("out"));
        os << report_tsv(report);
        write_run_log(cfg.path("out"), "evaluate", cfg, {gold_path, pred_path},
                      {cfg.path("out")});
    }
    return kExitOk;
}

inline int cmd_ensemble(const RunConfig& cfg, std::ostream& out) {
    const std::string manifest_path = cfg.require_path("models");
    const std::string out_path = cfg.require_path("out");
    const std::vector<PredictionSet> models = read_model_manifest(manifest_path);
    const PredictionSet merged = ensemble_predictions(models, cfg.ensemble);
    write_predictions(merged, out_path);
    out << "ensembled " << models.size() << " models into " << out_path << "\n";
    write_run_log(out_path, "ensemble", cfg, {manifest_path}, {out_path});
    return kExitOk;
}

inline int cmd_tune(const RunConfig& cfg, std::ostream& out) {
    const std::string manifest_path = cfg.require_path("models");
    const std::string gold_path = cfg.require_path("gold");
    const std::string out_path = cfg.require_path("out");
    const std::vector<PredictionSet> models = read_model_manifest(manifest_path);
    const std::vector<Sentence> gold = read_corpus(gold_path);
    const TuneResult result = tune_thresholds(models, gold, cfg.threshold_grid(),
                                              cfg.ensemble.objective, cfg.ensemble.largest);
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw ParseError("cannot write tuning report: " + out_path);
    os << tune_report_tsv(result);
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "best theta1=%.2f theta2=%.2f theta3=%.2f (objective %.4f)",
                  result.best.theta1, result.best.theta2, result.best.theta3,
                  result.best_score);
    out << buf << "\n";
    write_run_log(out_path, "tune", cfg, {manifest_path, gold_path}, {out_path});
    return kExitOk;
}

inline int cmd_graph(const RunConfig& cfg, std::ostream& out) {
    const std::string input_path = cfg.require_path("input");
    const std::string out_path = cfg.require_path("out");
    const bool dep_mode = !cfg.path("dep").empty();
    const bool lex_mode = !cfg.path("lexicon").empty();
    if (dep_mode == lex_mode)
        throw UsageError("graph needs exactly one of --dep or --lexicon");

    const std::vector<Sentence> corpus = read_corpus(input_path);
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw ParseError("cannot write edge list: " + out_path);
    std::vector<std::string> inputs = {input_path};

    const auto dump = [&](const Sentence& s, const CharGraph& g) {
        for (const auto& [edge, tags] : g.edges())
            os << s.id << "\t" << edge.first + 1 << "\t" << edge.second + 1 << "\t"
               << edge_tag_names(tags) << "\n";
    };
    if (dep_mode) {
        const std::vector<DependencyParse> parses = read_dependency_file(cfg.path("dep"));
        if (parses.size() != corpus.size())
            throw ParseError("dependency file has " + std::to_string(parses.size()) +
                             " parses for " + std::to_string(corpus.size()) + " sentences");
        inputs.push_back(cfg.path("dep"));
        for (std::size_t i = 0; i < corpus.size(); ++i) {
            check_parse_covers(parses[i], corpus[i]);
            dump(corpus[i], dep_to_char_adjacency(parses[i]));
        }
    } else {
        const Lexicon lexicon = read_lexicon(cfg.path("lexicon"));
        inputs.push_back(cfg.path("lexicon"));
        for (const Sentence& s : corpus) dump(s, build_lexicon_graph(s.chars, lexicon));
    }
    out << "wrote " << out_path << "\n";
    write_run_log(out_path, "graph", cfg, inputs, {out_path});
    return kExitOk;
}

inline int cmd_farm(const RunConfig& cfg_in, std::ostream& out) {
    RunConfig cfg = cfg_in;
    const std::string train_path = cfg.require_path("train");
    const std::string input_path = cfg.require_path("input");
    const std::string out_dir = cfg.require_path("out_dir");
    if (cfg.farm_models < 1) throw UsageError("farm_models must be >= 1");
    std::filesystem::create_directories(out_dir);

    const std::vector<Sentence> train_corpus = read_corpus(train_path);
    const std::vector<Sentence> input_corpus = read_corpus(input_path);
    SideInputs train_side = load_side_inputs(cfg.model.variant, cfg, "dep", "frozen");
    SideInputs input_side =
        load_side_inputs(cfg.model.variant, cfg, "input_dep", "input_frozen");
    if (cfg.model.variant == Variant::C) input_side.lexicon = train_side.lexicon;
    if (cfg.model.variant == Variant::B && cfg.model.frozen_width == 0)
        cfg.model.frozen_width = train_side.frozen->width;

    const std::string manifest_path =
        (std::filesystem::path(out_dir) / "manifest.tsv").string();
    std::ofstream manifest(manifest_path, std::ios::binary);
    if (!manifest) throw ParseError("cannot write manifest: " + manifest_path);

    std::vector<std::string> outputs;
    for (int k = 0; k < cfg.farm_models; ++k) {
        const std::uint64_t seed = cfg.train.seed + static_cast<std::uint64_t>(k);
        TrainConfig tc = cfg.train;
        tc.seed = seed;

        ModelParams params;
        params.config = cfg.model;
        params.vocab = Vocabulary::build(train_corpus);
        Rng init_rng(seed);
        params.init(init_rng);

        std::vector<TaggerInput> train_inputs = build_inputs(
            params, train_corpus, train_side.parses ? &*train_side.parses : nullptr,
            train_side.lexicon ? &*train_side.lexicon : nullptr,
            train_side.frozen ? &*train_side.frozen : nullptr, true);
        train(params, train_inputs, tc, nullptr, {}, [&](const EpochLog& log) {
            if (log.epoch == tc.epochs)
                out << "seed " << seed << " final loss " << log.mean_loss << "\n";
        });

        const std::string ckpt_name = "model-" + std::to_string(seed) + ".ckpt";
        const std::string pred_name = "pred-" + std::to_string(seed) + ".tsv";
        const std::string ckpt_path = (std::filesystem::path(out_dir) / ckpt_name).string();
        const std::string pred_path = (std::filesystem::path(out_dir) / pred_name).string();
        save_checkpoint(params, ckpt_path, seed, tc.epochs);

        std::vector<TaggerInput> pred_inputs = build_inputs(
            params, input_corpus, input_side.parses ? &*input_side.parses : nullptr,
            input_side.lexicon ? &*input_side.lexicon : nullptr,
            input_side.frozen ? &*input_side.frozen : nullptr, false);
        write_predictions(predict(params, pred_inputs, ckpt_name), pred_path);

        manifest << pred_name << "\t" << (cfg.model.variant == Variant::C ? 1 : 0) << "\n";
        outputs.push_back(ckpt_path);
        outputs.push_back(pred_path);
    }
    manifest.close();
    outputs.push_back(manifest_path);

    std::vector<std::string> input_files = {train_path, input_path};
    for (const auto& f : train_side.files) input_files.push_back(f);
    for (const auto& f : input_side.files) input_files.push_back(f);
    write_run_log(manifest_path, "farm", cfg, input_files, outputs);
    out << "farm complete: " << manifest_path << "\n";
    return kExitOk;
}

inline int cmd_synth(const RunConfig& cfg, std::ostream& out) {
    const std::string out_dir = cfg.require_path("out_dir");
    std::filesystem::create_directories(out_dir);
    SynthConfig sc;
    sc.train_count = cfg.synth_train;
    sc.test_count = cfg.synth_test;
    sc.error_rate = cfg.synth_error_rate;
    sc.seed = cfg.train.seed;
    if (cfg.model.frozen_width > 0) sc.frozen_width = cfg.model.frozen_width;
    const SynthCorpus corpus = generate_synth_corpus(sc);

    const auto at = [&](const char* name) {
        return (std::filesystem::path(out_dir) / name).string();
    };
    write_corpus(corpus.train, at("train.jsonl"));
    write_corpus(corpus.test, at("test.jsonl"));
    write_dependency_file(corpus.train_parses, at("train.dep.tsv"));
    write_dependency_file(corpus.test_parses, at("test.dep.tsv"));
    {
        std::ofstream os(at("lexicon.txt"), std::ios::binary);
        for (const auto& w : corpus.lexicon_words) os << utf8_encode(w) << "\n";
    }
    write_frozen_table(corpus.train_frozen, at("train.emb"));
    write_frozen_table(corpus.test_frozen, at("test.emb"));

    write_run_log(at("train.jsonl"), "synth", cfg, {},
                  {at("train.jsonl"), at("test.jsonl"), at("train.dep.tsv"),
                   at("test.dep.tsv"), at("lexicon.txt"), at("train.emb"), at("test.emb")});
    out << "synthetic corpus written to " << out_dir << "\n";
    return kExitOk;
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    try {
        const detail::ParsedArgs parsed = detail::parse_args(args);
        if (parsed.help) {
            out << usage_text();
            return kExitOk;
        }
        const RunConfig cfg = load_config(parsed.config_path, parsed.overrides);
        if (parsed.command == "train") return detail::cmd_train(cfg, out);
        if (parsed.command == "predict") return detail::cmd_predict(cfg, out);
        if (parsed.command == "ensemble") return detail::cmd_ensemble(cfg, out);
        if (parsed.command == "tune") return detail::cmd_tune(cfg, out);
        if (parsed.command == "evaluate") return detail::cmd_evaluate(cfg, out);
        if (parsed.command == "graph") return detail::cmd_graph(cfg, out);
        if (parsed.command == "farm") return detail::cmd_farm(cfg, out);
        if (parsed.command == "synth") return detail::cmd_synth(cfg, out);
        throw UsageError("unknown command '" + parsed.command + "'");
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitParse;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const IntegrityError& e) {
        err << "integrity error: " << e.what() << "\n";
        return kExitIntegrity;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

}  // namespace graminspect::cli

#endif  // GRAMINSPECT_CLI_HPP
