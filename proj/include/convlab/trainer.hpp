#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "convlab/checkpoint.hpp"
#include "convlab/multilingual.hpp"
#include "convlab/sampler.hpp"

namespace convlab {

struct TrainRun {
  ArchConfig arch; ///< untie boundary decides the shared/per-language split
  FeatureConfig features;
  GammaSchedule schedule;
  OptimizerConfig optimizer;
  std::size_t batch_size = 64;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  /// Round-robin updates per epoch; 0 derives ceil(frames / (batch * languages)).
  std::size_t updates_per_epoch = 0;
  /// Emit a step record every this many updates (0 = never).
  std::size_t log_every = 10;
  bool eval_each_epoch = true;
  /// Languages to train; empty = every language in the corpus.
  std::vector<std::uint16_t> languages;
  /// Directory for end-of-epoch checkpoints; empty disables them.
  std::string checkpoint_dir;
  /// Extra manifest fields stored in every checkpoint (feature settings,
  /// normalization statistics).
  nlohmann::ordered_json manifest_extra = nlohmann::ordered_json::object();
};

using Record = nlohmann::ordered_json;
using MetricsSink = std::function<void(const Record &)>;

/// Line-delimited JSON records on a stream.
inline MetricsSink jsonl_sink(std::ostream &os) {
  return [&os](const Record &r) { os << r.dump() << '\n'; };
}

struct StepLoss {
  std::uint64_t step = 0;
  std::uint16_t language = 0;
  double loss = 0.0;
  double gamma = 0.0;
};

struct EpochStats {
  std::size_t epoch = 0;
  std::uint16_t language = 0;
  EvalResult train;
  EvalResult heldout; ///< frames == 0 when no held-out corpus was given
  double sample_entropy = 0.0;
  double gamma = 0.0;
};

struct TrainHistory {
  std::vector<StepLoss> steps;
  std::vector<EpochStats> epochs;
};

/// Round-robin multilingual training driven by per-language balanced
/// samplers. Everything random flows from run.seed, so two trainers with the
/// same inputs produce identical histories, metrics and checkpoints.
template <typename T = float> class Trainer {
public:
  Trainer(const Corpus &corpus, TrainRun run, MetricsSink sink = {},
          const Corpus *heldout = nullptr)
      : corpus_(&corpus), heldout_(heldout), run_(std::move(run)), sink_(std::move(sink)) {
    tune_allocator();
    if (run_.batch_size == 0) throw ContractError("batch size must be at least 1");
    if (corpus.utterances.empty()) throw ContractError("training corpus is empty");
    if (run_.languages.empty())
      for (const auto &l : corpus.languages) run_.languages.push_back(l.id);
    std::sort(run_.languages.begin(), run_.languages.end());
    run_.languages.erase(std::unique(run_.languages.begin(), run_.languages.end()),
                         run_.languages.end());

    LanguageTable table;
    std::size_t frames = 0;
    for (auto id : run_.languages) {
      table[id] = corpus.language(id).classes;
      frames += corpus.frames(id);
    }
    if (run_.updates_per_epoch == 0) {
      const std::size_t per = run_.batch_size * run_.languages.size();
      run_.updates_per_epoch = std::max<std::size_t>(1, (frames + per - 1) / per);
    }
    geom_ = InputGeometry{run_.features.multiscale.strides.size() *
                              corpus.utterances.front().channels,
                          run_.features.multiscale.window(), corpus.mel_bins};
    run_.features.multiscale.validate();
    net_ = std::make_unique<MultilingualNetwork<T>>(run_.arch, geom_, table,
                                                    derive_seed(run_.seed, "init"));
    opt_ = std::make_unique<Optimizer<T>>(run_.optimizer, net_->named_params());
    for (auto id : run_.languages) {
      samplers_.emplace(id, SamplerState(corpus, id, derive_seed(run_.seed, "sampler", id),
                                         run_.schedule.at(0.0)));
      sampled_[id].assign(table[id], 0.0);
    }
  }

  const TrainRun &run_config() const { return run_; }
  const InputGeometry &geometry() const { return geom_; }
  MultilingualNetwork<T> &network() { return *net_; }
  const MultilingualNetwork<T> &network() const { return *net_; }
  Optimizer<T> &optimizer() { return *opt_; }
  const TrainHistory &history() const { return history_; }
  std::uint64_t step_count() const { return step_; }
  std::size_t epoch() const { return epoch_; }
  std::uint64_t total_updates() const { return run_.updates_per_epoch * run_.epochs; }
  bool done() const { return step_ >= total_updates(); }
  const SamplerState &sampler(std::uint16_t lang) const { return samplers_.at(lang); }

  double progress(std::uint64_t step) const {
    const auto total = total_updates();
    if (total <= 1) return 0.0;
    return std::min(1.0, double(step) / double(total - 1));
  }

  /// One round-robin update; closes the epoch when its last update is done.
  std::map<std::uint16_t, double> step() {
    const double gamma = run_.schedule.at(progress(step_));
    std::vector<Batch> batches;
    for (auto id : run_.languages) {
      auto &s = samplers_.at(id);
      s.set_gamma(gamma);
      batches.push_back(sample_batch(s, *corpus_, id, run_.batch_size, run_.features));
      for (auto t : batches.back().targets) sampled_[id][t] += 1.0;
    }
    auto losses = round_robin_update(*net_, std::span<const Batch>(batches), *opt_);
    for (const auto &[id, loss] : losses)
      if (!std::isfinite(loss)) throw DivergedError(step_, last_checkpoint_);
    ++step_;
    for (const auto &[id, loss] : losses) {
      history_.steps.push_back({step_, id, loss, gamma});
      if (run_.log_every && step_ % run_.log_every == 0)
        emit({{"type", "step"},
              {"step", step_},
              {"epoch", epoch_},
              {"language", id},
              {"loss", loss},
              {"gamma", gamma},
              {"accuracy", nullptr}});
    }
    if (step_ % run_.updates_per_epoch == 0) finish_epoch(gamma);
    return losses;
  }

  const TrainHistory &run() {
    while (!done()) step();
    return history_;
  }

  Checkpoint capture() const {
    Record extra = run_.manifest_extra.is_object() ? run_.manifest_extra : Record::object();
    extra["step"] = step_;
    extra["epoch"] = epoch_;
    extra["seed"] = run_.seed;
    extra["batch_size"] = run_.batch_size;
    extra["updates_per_epoch"] = run_.updates_per_epoch;
    extra["gamma_schedule"] = run_.schedule.to_string();
    Record rng = Record::object();
    Record hist = Record::object();
    for (const auto &[id, s] : samplers_) {
      rng[std::to_string(id)] = s.rng().state();
      hist[std::to_string(id)] = sampled_.at(id);
    }
    extra["sampler_rng"] = rng;
    extra["sampled_classes"] = hist;
    return capture_checkpoint(*net_, *opt_, extra);
  }

  void save(const std::string &path) const { write_checkpoint(capture(), path); }

  /// Continues from a checkpoint written by a trainer with the same corpus
  /// and run configuration.
  void restore(const Checkpoint &ck) {
    const auto &m = ck.manifest;
    auto require = [&](const char *key) -> const Record & {
      if (!m.contains(key)) throw IncompatibilityError(key, "missing from checkpoint manifest");
      return m.at(key);
    };
    if (require("seed").template get<std::uint64_t>() != run_.seed)
      throw IncompatibilityError("seed", "checkpoint was produced with another master seed");
    if (require("batch_size").template get<std::size_t>() != run_.batch_size)
      throw IncompatibilityError("batch_size", "batch size differs");
    if (require("updates_per_epoch").template get<std::size_t>() != run_.updates_per_epoch)
      throw IncompatibilityError("updates_per_epoch", "epoch length differs");
    if (require("gamma_schedule").template get<std::string>() != run_.schedule.to_string())
      throw IncompatibilityError("gamma_schedule", "gamma schedule differs");
    restore_checkpoint(ck, *net_, *opt_);
    step_ = require("step").template get<std::uint64_t>();
    epoch_ = require("epoch").template get<std::size_t>();
    const auto &rng = require("sampler_rng");
    const auto &hist = require("sampled_classes");
    for (auto &[id, s] : samplers_) {
      const auto key = std::to_string(id);
      if (!rng.contains(key) || !hist.contains(key))
        throw IncompatibilityError("sampler_rng", "no sampler state for language " + key);
      s.rng().set_state(rng.at(key).template get<std::string>());
      s.set_gamma(run_.schedule.at(progress(step_)));
      sampled_[id] = hist.at(key).template get<std::vector<double>>();
    }
  }

  void restore(const std::string &path) { restore(read_checkpoint(path)); }

private:
  void emit(const Record &r) {
    if (sink_) sink_(r);
  }

  void finish_epoch(double gamma) {
    ++epoch_;
    for (auto id : run_.languages) {
      EpochStats es;
      es.epoch = epoch_;
      es.language = id;
      es.gamma = gamma;
      auto &counts = sampled_[id];
      double total = 0.0;
      for (double c : counts) total += c;
      std::vector<double> p(counts.size());
      for (std::size_t k = 0; k < p.size(); ++k) p[k] = total > 0 ? counts[k] / total : 0.0;
      es.sample_entropy = entropy(p);
      std::fill(counts.begin(), counts.end(), 0.0);
      Record r{{"type", "epoch"}, {"step", step_},   {"epoch", epoch_},
               {"language", id},  {"loss", nullptr}, {"gamma", gamma},
               {"accuracy", nullptr}};
      if (run_.eval_each_epoch) {
        es.train = evaluate(*net_, *corpus_, id, run_.features);
        r["loss"] = es.train.cross_entropy;
        r["accuracy"] = es.train.accuracy;
        if (heldout_ && heldout_->has_language(id) && heldout_->frames(id) > 0) {
          es.heldout = evaluate(*net_, *heldout_, id, run_.features);
          r["heldout_loss"] = es.heldout.cross_entropy;
          r["heldout_accuracy"] = es.heldout.accuracy;
        }
      }
      r["sample_entropy"] = es.sample_entropy;
      history_.epochs.push_back(es);
      emit(r);
    }
    if (run_.optimizer.finetune_after_epoch >= 0 &&
        epoch_ == std::size_t(run_.optimizer.finetune_after_epoch) &&
        opt_->mode() != OptimizerMode::sgd)
      opt_->switch_to_sgd();
    if (!run_.checkpoint_dir.empty()) {
      std::filesystem::create_directories(run_.checkpoint_dir);
      const auto path = (std::filesystem::path(run_.checkpoint_dir) /
                         ("epoch-" + std::to_string(epoch_) + ".ckpt"))
                            .string();
      save(path);
      last_checkpoint_ = path;
    }
  }

  const Corpus *corpus_;
  const Corpus *heldout_;
  TrainRun run_;
  MetricsSink sink_;
  InputGeometry geom_;
  std::unique_ptr<MultilingualNetwork<T>> net_;
  std::unique_ptr<Optimizer<T>> opt_;
  std::map<std::uint16_t, SamplerState> samplers_;
  std::map<std::uint16_t, std::vector<double>> sampled_;
  TrainHistory history_;
  std::uint64_t step_ = 0;
  std::size_t epoch_ = 0;
  std::string last_checkpoint_;
};

/// Runs a full training job and returns its history.
template <typename T = float>
TrainHistory train(const Corpus &corpus, const TrainRun &run, MetricsSink sink = {},
                   const Corpus *heldout = nullptr) {
  Trainer<T> trainer(corpus, run, std::move(sink), heldout);
  return trainer.run();
}

} // namespace convlab
