#pragma once

// Command-line front end. Kept in a header so tests can drive dispatch()
// in-process; tools/convlab.cpp only forwards argv.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "convlab/arch.hpp"
#include "convlab/checkpoint.hpp"
#include "convlab/config.hpp"
#include "convlab/corpus_io.hpp"
#include "convlab/features.hpp"
#include "convlab/gradcheck_suite.hpp"
#include "convlab/synthetic.hpp"
#include "convlab/trainer.hpp"

namespace convlab::cli {

inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kUsage = 2;

struct Options {
  struct {
    std::string out;
    std::size_t languages = 3;
    std::size_t classes = 20;
    std::size_t frames = 20000;
    std::vector<std::size_t> frames_per_language;
    std::size_t bins = 40;
    std::uint64_t seed = 0;
    double noise = SyntheticOptions{}.noise;
    std::uint64_t split = 0;
  } gendata;
  struct {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string resume;
    std::string save;
  } train;
  struct {
    std::string checkpoint;
    std::string corpus;
    std::optional<std::uint16_t> language;
  } eval;
  struct {
    std::string arch;
    std::string geom = "3x17x40";
    std::size_t out_width = 1000;
    std::optional<std::size_t> untie;
  } inspect;
  struct {
    std::size_t configs = 50;
    std::uint64_t seed = 0;
    double tol = 1e-4;
    double step = 1e-5;
  } gradcheck;
  struct {
    std::string corpus;
    std::size_t utterance = 0;
    std::size_t frame = 0;
    std::size_t context = 8;
    std::vector<std::size_t> strides{1};
    bool deltas = false;
    bool normalize = false;
  } features;
};

/// Builds the parser; every option carries a description so --help lists it.
inline std::unique_ptr<CLI::App> make_app(Options &o) {
  auto app = std::make_unique<CLI::App>(
      "convlab: deep CNN acoustic-model training lab (synthetic data, multilingual heads, "
      "balanced sampling)",
      "convlab");
  app->require_subcommand(1);
  app->set_help_all_flag("--help-all", "Print help for every subcommand");

  auto *g = app->add_subcommand("gendata", "Write a synthetic multilingual corpus");
  g->add_option("--out", o.gendata.out, "Output corpus path")->required();
  g->add_option("--languages", o.gendata.languages, "Number of languages")->capture_default_str();
  g->add_option("--classes", o.gendata.classes, "Classes per language")->capture_default_str();
  g->add_option("--frames", o.gendata.frames, "Frames per language")->capture_default_str();
  g->add_option("--frames-per-language", o.gendata.frames_per_language,
                "Per-language frame counts (overrides --frames)")
      ->delimiter(',');
  g->add_option("--bins", o.gendata.bins, "Mel bins per frame")->capture_default_str();
  g->add_option("--seed", o.gendata.seed, "Generator seed")->capture_default_str();
  g->add_option("--noise", o.gendata.noise, "Noise standard deviation")->capture_default_str();
  g->add_option("--split", o.gendata.split,
                "Utterance stream index (0 training, 1 held-out, ...)")
      ->capture_default_str();

  auto *t = app->add_subcommand("train", "Train from a key=value run config");
  t->add_option("--config", o.train.config, "Run config file")->required();
  t->add_option("--seed", o.train.seed, "Override the config's master seed");
  t->add_option("--resume", o.train.resume, "Continue from this checkpoint");
  t->add_option("--save", o.train.save, "Write the final checkpoint here");

  auto *e = app->add_subcommand("eval", "Frame accuracy of a checkpoint on a corpus");
  e->add_option("--checkpoint", o.eval.checkpoint, "Checkpoint file")->required();
  e->add_option("--corpus", o.eval.corpus, "Corpus file")->required();
  e->add_option("--language", o.eval.language, "Only this language id");

  auto *i = app->add_subcommand("inspect", "Per-layer shapes and parameter counts");
  i->add_option("--arch", o.inspect.arch, "Preset name or architecture file")->required();
  i->add_option("--geom", o.inspect.geom, "Input geometry CxTxF")->capture_default_str();
  i->add_option("--out-width", o.inspect.out_width, "Output layer width")->capture_default_str();
  i->add_option("--untie", o.inspect.untie, "Number of per-language fc layers");

  auto *gc = app->add_subcommand("gradcheck", "Finite-difference check of every layer primitive");
  gc->add_option("--configs", o.gradcheck.configs, "Random configurations per primitive")
      ->capture_default_str();
  gc->add_option("--seed", o.gradcheck.seed, "Seed for the random configurations")
      ->capture_default_str();
  gc->add_option("--tol", o.gradcheck.tol, "Maximum allowed relative error")->capture_default_str();
  gc->add_option("--step", o.gradcheck.step, "Central-difference step")->capture_default_str();

  auto *f = app->add_subcommand("features", "Dump the multi-scale input window for one frame");
  f->add_option("--corpus", o.features.corpus, "Corpus file")->required();
  f->add_option("--utterance", o.features.utterance, "Utterance index")->capture_default_str();
  f->add_option("--frame", o.features.frame, "Center frame")->capture_default_str();
  f->add_option("--context", o.features.context, "Half window of the stride-1 map")
      ->capture_default_str();
  f->add_option("--strides", o.features.strides, "Comma-separated strides, starting at 1")
      ->delimiter(',');
  f->add_flag("--deltas", o.features.deltas, "Append delta and delta-delta channels");
  f->add_flag("--normalize", o.features.normalize, "Standardize with corpus-wide statistics");
  return app;
}

namespace detail {

inline nlohmann::ordered_json features_json(const FeatureConfig &fc) {
  return {{"context", fc.multiscale.context},
          {"strides", fc.multiscale.strides},
          {"deltas", fc.deltas}};
}

inline FeatureConfig features_from_json(const nlohmann::ordered_json &j) {
  FeatureConfig fc;
  fc.multiscale.context = j.at("context").get<std::size_t>();
  fc.multiscale.strides = j.at("strides").get<std::vector<std::size_t>>();
  fc.deltas = j.at("deltas").get<bool>();
  return fc;
}

inline int run_gendata(const Options &o, std::ostream &out) {
  SyntheticOptions opt;
  opt.noise = o.gendata.noise;
  opt.split = o.gendata.split;
  opt.frames_per_language = o.gendata.frames_per_language;
  const auto c = gen_synthetic_corpus(o.gendata.languages, o.gendata.classes, o.gendata.frames,
                                      o.gendata.bins, o.gendata.seed, opt);
  write_corpus(c, o.gendata.out);
  out << "wrote " << c.utterances.size() << " utterances, " << c.total_frames() << " frames, "
      << c.languages.size() << " languages to " << o.gendata.out << '\n';
  return kOk;
}

inline int run_inspect(const Options &o, std::ostream &out, std::ostream &err) {
  InputGeometry geom;
  ArchConfig cfg;
  try {
    geom = parse_geometry(o.inspect.geom);
    cfg = resolve_arch(o.inspect.arch, geom.channels);
    if (o.inspect.untie) set_untied_fc(cfg, *o.inspect.untie);
  } catch (const Error &e) {
    err << "convlab inspect: " << e.what() << '\n';
    return kUsage;
  }
  const auto shapes = infer_shapes(cfg, geom, o.inspect.out_width);
  const auto counts = count_params(cfg, geom, o.inspect.out_width);
  out << "architecture " << cfg.name << "  geometry " << geometry_string(geom)
      << "  output width " << o.inspect.out_width << '\n';
  out << std::left << std::setw(4) << "#" << std::setw(26) << "layer" << std::setw(14)
      << "output" << "params" << '\n';
  for (const auto &ls : shapes.layers) {
    const auto &l = cfg.layers[ls.layer];
    out << std::left << std::setw(4) << ls.layer << std::setw(26)
        << (layer_label(l) + (ls.layer >= cfg.untie_boundary ? " *" : "")) << std::setw(14)
        << shape_string(ls.shape) << counts.per_layer[ls.layer] << '\n';
  }
  out << "flatten width " << shapes.flatten_width << '\n';
  out << "weight layers " << cfg.count(LayerKind::conv) + cfg.count(LayerKind::fc) << " ("
      << cfg.count(LayerKind::conv) << " conv, " << cfg.count(LayerKind::fc) << " fc)\n";
  out << "per-language fc layers " << cfg.untied_fc() << " (marked *)\n";
  out << "conv parameters " << counts.conv_total << '\n';
  out << "fc parameters " << counts.fc_total << '\n';
  out << "total parameters " << counts.total << '\n';
  return kOk;
}

inline int run_gradcheck(const Options &o, std::ostream &out) {
  const auto results = run_gradient_suite(o.gradcheck.configs, o.gradcheck.seed, o.gradcheck.step);
  bool ok = true;
  for (const auto &r : results) {
    const bool pass = r.max_rel_error <= o.gradcheck.tol;
    ok = ok && pass;
    out << (pass ? "PASS " : "FAIL ") << std::left << std::setw(14) << r.primitive << " configs "
        << r.configs << "  max rel error " << std::scientific << std::setprecision(3)
        << r.max_rel_error << std::defaultfloat << "  worst " << r.worst << '\n';
  }
  return ok ? kOk : kFailure;
}

inline int run_features(const Options &o, std::ostream &out, std::ostream &err) {
  FeatureConfig fc;
  fc.multiscale.context = o.features.context;
  fc.multiscale.strides = o.features.strides;
  fc.deltas = o.features.deltas;
  try {
    fc.multiscale.validate();
  } catch (const ContractError &e) {
    err << "convlab features: " << e.what() << '\n';
    return kUsage;
  }
  auto corpus = read_corpus(o.features.corpus);
  if (o.features.utterance >= corpus.utterances.size())
    throw IndexError("utterance " + std::to_string(o.features.utterance) + " out of range (" +
                     std::to_string(corpus.utterances.size()) + " utterances)");
  if (o.features.normalize) normalize(corpus);
  Utterance u = corpus.utterances[o.features.utterance];
  if (fc.deltas) u = add_deltas(u);
  const auto w = build_multiscale(u, o.features.frame, fc.multiscale);
  out << "shape " << shape_string(w.shape()) << "  utterance " << o.features.utterance
      << "  frame " << o.features.frame << "  target " << u.targets.at(o.features.frame) << '\n';
  out << std::setprecision(6);
  for (std::size_t m = 0; m < w.dim(0); ++m)
    for (std::size_t r = 0; r < w.dim(1); ++r) {
      out << "map " << m << " row " << r << ':';
      for (std::size_t b = 0; b < w.dim(2); ++b) out << ' ' << w.at({m, r, b});
      out << '\n';
    }
  return kOk;
}

inline int run_train(const Options &o, std::ostream &out, std::ostream &err) {
  RunConfig cfg;
  Corpus corpus, heldout;
  TrainRun run;
  try {
    cfg = load_run_config(o.train.config);
    if (o.train.seed) cfg.seed = *o.train.seed;
  } catch (const Error &e) {
    err << "convlab train: " << e.what() << '\n';
    return kUsage;
  }
  InputGeometry geom;
  try {
    if (!cfg.corpus.empty() && std::filesystem::is_regular_file(cfg.corpus))
      corpus = read_corpus(cfg.corpus);
    geom = validate_run_config(cfg, corpus.mel_bins);
    run = make_train_run(cfg, geom);
    if (run.arch.untied_fc() >= run.arch.fc_indices().size())
      throw ConfigError("untie: the first fc layer must stay shared");
    infer_shapes(run.arch, geom, 1);
  } catch (const FormatError &) {
    throw;
  } catch (const GeometryError &) {
    throw;
  } catch (const Error &e) {
    err << "convlab train: " << e.what() << '\n';
    return kUsage;
  }
  const auto stats = prepare_corpus(corpus, run.features);
  if (!cfg.heldout.empty()) {
    heldout = read_corpus(cfg.heldout);
    prepare_corpus(heldout, run.features, stats);
  }
  run.manifest_extra["features"] = features_json(run.features);
  run.manifest_extra["norm"] = {{"channels", stats.channels},
                                {"bins", stats.bins},
                                {"mean", stats.mean},
                                {"var", stats.var}};

  std::ofstream file;
  std::ostream *sink_stream = &out;
  if (cfg.metrics != "-") {
    file.open(cfg.metrics, std::ios::trunc);
    if (!file) throw Error("cannot open metrics file '" + cfg.metrics + "'");
    sink_stream = &file;
  }
  Trainer<float> trainer(corpus, run, jsonl_sink(*sink_stream),
                         cfg.heldout.empty() ? nullptr : &heldout);
  if (!o.train.resume.empty()) trainer.restore(o.train.resume);
  trainer.run();
  if (!o.train.save.empty()) trainer.save(o.train.save);
  err << "trained " << trainer.step_count() << " updates over " << trainer.epoch()
      << " epochs\n";
  return kOk;
}

inline int run_eval(const Options &o, std::ostream &out) {
  auto model = load_checkpoint<float>(o.eval.checkpoint);
  const auto &m = model.manifest;
  if (!m.contains("features") || !m.contains("norm"))
    throw IncompatibilityError("features", "checkpoint lacks feature settings");
  const auto fc = features_from_json(m.at("features"));
  NormStats st;
  st.channels = m.at("norm").at("channels").get<std::size_t>();
  st.bins = m.at("norm").at("bins").get<std::size_t>();
  st.mean = m.at("norm").at("mean").get<std::vector<double>>();
  st.var = m.at("norm").at("var").get<std::vector<double>>();
  auto corpus = read_corpus(o.eval.corpus);
  prepare_corpus(corpus, fc, st);
  for (const auto &[id, width] : model.network->languages()) {
    if (o.eval.language && *o.eval.language != id) continue;
    if (!corpus.has_language(id) || corpus.frames(id) == 0) continue;
    if (corpus.language(id).classes != width)
      throw IncompatibilityError("languages", "language " + std::to_string(id) +
                                                  " class count differs from the checkpoint");
    const auto r = evaluate(*model.network, corpus, id, fc);
    nlohmann::ordered_json j{{"language", id},
                             {"frames", r.frames},
                             {"accuracy", r.accuracy},
                             {"cross_entropy", r.cross_entropy}};
    out << j.dump() << '\n';
  }
  if (o.eval.language && !model.network->has_head(*o.eval.language))
    throw NotFoundError("checkpoint has no head for language " +
                        std::to_string(*o.eval.language));
  return kOk;
}

} // namespace detail

/// Parses argv (without the program name) and runs the subcommand.
/// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
inline int dispatch(const std::vector<std::string> &args, std::ostream &out = std::cout,
                    std::ostream &err = std::cerr) {
  Options o;
  auto app = make_app(o);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app->parse(reversed);
  } catch (const CLI::CallForHelp &) {
    // Top-level --help lists every subcommand with all of its flags.
    if (app->get_subcommands().empty())
      out << app->help("", CLI::AppFormatMode::All);
    else
      out << app->help();
    return kOk;
  } catch (const CLI::CallForAllHelp &) {
    out << app->help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError &e) {
    err << "convlab: " << e.what() << '\n' << app->help();
    return kUsage;
  }
  try {
    if (app->got_subcommand("gendata")) return detail::run_gendata(o, out);
    if (app->got_subcommand("inspect")) return detail::run_inspect(o, out, err);
    if (app->got_subcommand("gradcheck")) return detail::run_gradcheck(o, out);
    if (app->got_subcommand("features")) return detail::run_features(o, out, err);
    if (app->got_subcommand("train")) return detail::run_train(o, out, err);
    if (app->got_subcommand("eval")) return detail::run_eval(o, out);
  } catch (const std::exception &e) {
    err << "convlab: " << e.what() << '\n';
    return kFailure;
  }
  err << app->help();
  return kUsage;
}

inline int dispatch(int argc, char **argv, std::ostream &out = std::cout,
                    std::ostream &err = std::cerr) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

} // namespace convlab::cli
