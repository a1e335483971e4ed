#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "convlab/arch.hpp"
#include "convlab/errors.hpp"
#include "convlab/features.hpp"
#include "convlab/optim.hpp"
#include "convlab/sampler.hpp"
#include "convlab/trainer.hpp"

namespace convlab {

/// Raised for malformed or inconsistent run configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Flat key=value run description. Lines starting with '#' are comments.
struct RunConfig {
  std::string arch = "VB"; ///< preset name or path to an architecture file
  std::optional<std::size_t> untie; ///< untied fc count; default from the architecture
  std::optional<InputGeometry> geom;
  FeatureConfig features;
  OptimizerConfig optimizer;
  GammaSchedule schedule;
  std::size_t batch = 64;
  std::size_t epochs = 1;
  std::size_t updates_per_epoch = 0;
  std::size_t log_every = 10;
  std::uint64_t seed = 0;
  std::string corpus;
  std::string heldout;
  std::string checkpoint_dir;
  std::string metrics = "-";

  static const std::vector<std::string> &keys() {
    static const std::vector<std::string> k = {
        "arch",      "untie",     "geom",    "context",  "strides",
        "deltas",    "optimizer", "rho",     "eps",      "alpha",
        "beta1",     "beta2",     "lr",      "mu",       "finetune_after_epoch",
        "gamma_schedule", "batch", "epochs", "updates_per_epoch", "log_every",
        "seed",      "corpus",    "heldout", "checkpoint_dir", "metrics"};
    return k;
  }
};

namespace detail {

inline double to_double(const std::string &key, const std::string &v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::logic_error &) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_u64(const std::string &key, const std::string &v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::logic_error &) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

inline bool to_bool(const std::string &key, const std::string &v) {
  const auto l = lower(v);
  if (l == "1" || l == "true" || l == "yes" || l == "on") return true;
  if (l == "0" || l == "false" || l == "no" || l == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline std::vector<std::size_t> to_strides(const std::string &key, const std::string &v) {
  std::vector<std::size_t> out;
  std::istringstream is(v);
  for (std::string item; std::getline(is, item, ',');) out.push_back(to_u64(key, trim(item)));
  return out;
}

} // namespace detail

inline RunConfig parse_run_config(std::string_view text) {
  RunConfig c;
  std::istringstream is{std::string(text)};
  std::size_t lineno = 0;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string v = detail::trim(line.substr(eq + 1));
    try {
      if (key == "arch") c.arch = v;
      else if (key == "untie") c.untie = detail::to_u64(key, v);
      else if (key == "geom") c.geom = parse_geometry(v);
      else if (key == "context") c.features.multiscale.context = detail::to_u64(key, v);
      else if (key == "strides") c.features.multiscale.strides = detail::to_strides(key, v);
      else if (key == "deltas") c.features.deltas = detail::to_bool(key, v);
      else if (key == "optimizer") c.optimizer.mode = parse_mode(v);
      else if (key == "rho") c.optimizer.rho = detail::to_double(key, v);
      else if (key == "eps") c.optimizer.eps = detail::to_double(key, v);
      else if (key == "alpha") c.optimizer.alpha = detail::to_double(key, v);
      else if (key == "beta1") c.optimizer.beta1 = detail::to_double(key, v);
      else if (key == "beta2") c.optimizer.beta2 = detail::to_double(key, v);
      else if (key == "lr") c.optimizer.lr = detail::to_double(key, v);
      else if (key == "mu") c.optimizer.mu = detail::to_double(key, v);
      else if (key == "finetune_after_epoch")
        c.optimizer.finetune_after_epoch = int(detail::to_double(key, v));
      else if (key == "gamma_schedule") c.schedule = GammaSchedule::parse(v);
      else if (key == "batch") c.batch = detail::to_u64(key, v);
      else if (key == "epochs") c.epochs = detail::to_u64(key, v);
      else if (key == "updates_per_epoch") c.updates_per_epoch = detail::to_u64(key, v);
      else if (key == "log_every") c.log_every = detail::to_u64(key, v);
      else if (key == "seed") c.seed = detail::to_u64(key, v);
      else if (key == "corpus") c.corpus = v;
      else if (key == "heldout") c.heldout = v;
      else if (key == "checkpoint_dir") c.checkpoint_dir = v;
      else if (key == "metrics") c.metrics = v;
      else throw ConfigError("unknown key '" + key + "'");
    } catch (const ConfigError &e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ContractError &e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + key + ": " + e.what());
    }
  }
  return c;
}

inline RunConfig load_run_config(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

/// Preset names resolve against the input channel count; anything else is
/// read as an architecture file.
inline ArchConfig resolve_arch(const std::string &arch, std::size_t input_channels) {
  if (std::filesystem::is_regular_file(arch)) {
    std::ifstream in(arch);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_dsl(ss.str());
  }
  return preset(arch, input_channels);
}

/// Checks referenced files and geometry consistency; returns the geometry
/// implied by the feature settings.
inline InputGeometry validate_run_config(const RunConfig &c, std::size_t mel_bins) {
  if (c.corpus.empty()) throw ConfigError("corpus: no training corpus given");
  if (!std::filesystem::is_regular_file(c.corpus))
    throw ConfigError("corpus: file '" + c.corpus + "' does not exist");
  if (!c.heldout.empty() && !std::filesystem::is_regular_file(c.heldout))
    throw ConfigError("heldout: file '" + c.heldout + "' does not exist");
  if (c.batch == 0) throw ConfigError("batch: must be at least 1");
  if (c.epochs == 0) throw ConfigError("epochs: must be at least 1");
  try {
    c.features.multiscale.validate();
  } catch (const ContractError &e) {
    throw ConfigError(std::string("strides: ") + e.what());
  }
  const auto geom = c.features.geometry(mel_bins);
  if (c.geom && !(*c.geom == geom))
    throw ConfigError("geom: " + geometry_string(*c.geom) + " disagrees with the features (" +
                      std::to_string(c.features.multiscale.strides.size()) + " scales x " +
                      std::to_string(c.features.base_channels()) + " channels, window " +
                      std::to_string(c.features.multiscale.window()) + ", " +
                      std::to_string(mel_bins) + " bins => " + geometry_string(geom) + ")");
  return geom;
}

inline TrainRun make_train_run(const RunConfig &c, const InputGeometry &geom) {
  TrainRun run;
  run.arch = resolve_arch(c.arch, geom.channels);
  if (c.untie) set_untied_fc(run.arch, *c.untie);
  run.features = c.features;
  run.schedule = c.schedule;
  run.optimizer = c.optimizer;
  run.batch_size = c.batch;
  run.epochs = c.epochs;
  run.updates_per_epoch = c.updates_per_epoch;
  run.log_every = c.log_every;
  run.seed = c.seed;
  run.checkpoint_dir = c.checkpoint_dir;
  return run;
}

} // namespace convlab
