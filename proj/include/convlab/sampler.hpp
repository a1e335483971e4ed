#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "convlab/errors.hpp"
#include "convlab/features.hpp"
#include "convlab/rng.hpp"
#include "convlab/tensor.hpp"

namespace convlab {

/// p_i = f_i^gamma / sum_j f_j^gamma. Classes with f_i = 0 get p_i = 0 for
/// every gamma, including gamma = 0.
inline std::vector<double> class_probs(std::span<const double> freqs, double gamma) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw ContractError("sampling exponent must be finite and non-negative");
  std::vector<double> p(freqs.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (!(freqs[i] >= 0.0) || !std::isfinite(freqs[i]))
      throw ContractError("class frequency " + std::to_string(i) + " is negative or not finite");
    if (freqs[i] > 0.0) {
      p[i] = gamma == 0.0 ? 1.0 : std::pow(freqs[i], gamma);
      total += p[i];
    }
  }
  if (total == 0.0) throw EmptyDistributionError("all class frequencies are zero");
  for (auto &v : p) v /= total;
  return p;
}

/// Priors to divide network posteriors by: the sampling distribution at the
/// final exponent of training.
inline std::vector<double> decoding_priors(std::span<const double> freqs, double final_gamma) {
  return class_probs(freqs, final_gamma);
}

/// Posteriors divided by priors, per row; rows are N x K.
inline std::vector<double> scaled_likelihoods(std::span<const double> posteriors,
                                              std::span<const double> priors) {
  if (priors.empty() || posteriors.size() % priors.size() != 0)
    throw DimensionError("posterior rows do not match prior length");
  std::vector<double> out(posteriors.size());
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const double p = priors[i % priors.size()];
    out[i] = p > 0.0 ? posteriors[i] / p : 0.0;
  }
  return out;
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

/// Piecewise-linear gamma over training progress in [0, 1].
class GammaSchedule {
public:
  GammaSchedule() : points_{{0.0, 1.0}} {}
  explicit GammaSchedule(std::vector<std::pair<double, double>> points)
      : points_(std::move(points)) {
    validate();
  }

  static GammaSchedule constant(double gamma) { return GammaSchedule({{0.0, gamma}}); }

  /// Comma-separated progress:gamma pairs, e.g. "0:0,1:1".
  static GammaSchedule parse(std::string_view text) {
    std::vector<std::pair<double, double>> pts;
    std::string item;
    std::istringstream is{std::string(text)};
    while (std::getline(is, item, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos)
        throw ContractError("schedule entry '" + item + "' is not progress:gamma");
      try {
        std::size_t used_a = 0, used_b = 0;
        const std::string a = detail::trim(item.substr(0, colon));
        const std::string b = detail::trim(item.substr(colon + 1));
        const double progress = std::stod(a, &used_a);
        const double gamma = std::stod(b, &used_b);
        if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument("junk");
        pts.emplace_back(progress, gamma);
      } catch (const std::logic_error &) {
        throw ContractError("schedule entry '" + item + "' is not progress:gamma");
      }
    }
    return GammaSchedule(std::move(pts));
  }

  double at(double progress) const {
    if (!(progress >= 0.0 && progress <= 1.0))
      throw ContractError("training progress " + std::to_string(progress) + " outside [0, 1]");
    if (progress <= points_.front().first) return points_.front().second;
    for (std::size_t i = 1; i < points_.size(); ++i) {
      const auto [x0, y0] = points_[i - 1];
      const auto [x1, y1] = points_[i];
      if (progress <= x1) return y0 + (y1 - y0) * (progress - x0) / (x1 - x0);
    }
    return points_.back().second;
  }

  double final_gamma() const { return points_.back().second; }
  const std::vector<std::pair<double, double>> &points() const { return points_; }

  std::string to_string() const {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < points_.size(); ++i)
      os << (i ? "," : "") << points_[i].first << ':' << points_[i].second;
    return os.str();
  }

private:
  void validate() const {
    if (points_.empty()) throw ContractError("gamma schedule needs at least one breakpoint");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto [x, y] = points_[i];
      if (!(x >= 0.0 && x <= 1.0)) throw ContractError("schedule progress must lie in [0, 1]");
      if (!(y >= 0.0) || !std::isfinite(y)) throw ContractError("schedule gamma must be >= 0");
      if (i && !(x > points_[i - 1].first))
        throw ContractError("schedule progress values must be strictly increasing");
    }
  }

  std::vector<std::pair<double, double>> points_;
};

inline double gamma_at(const GammaSchedule &schedule, double progress) {
  return schedule.at(progress);
}

struct FrameRef {
  std::uint32_t utterance = 0;
  std::uint32_t frame = 0;
};

/// Two-stage sampler for one language: a class by p_i, then a frame
/// uniformly among that class's frames, with replacement.
class SamplerState {
public:
  SamplerState() = default;

  SamplerState(const Corpus &corpus, std::uint16_t language, std::uint64_t seed, double gamma = 1.0)
      : language_(language), rng_(seed) {
    const auto &info = corpus.language(language);
    frames_.assign(info.classes, {});
    for (std::size_t ui = 0; ui < corpus.utterances.size(); ++ui) {
      const auto &u = corpus.utterances[ui];
      if (u.language != language) continue;
      for (std::size_t t = 0; t < u.frames; ++t)
        frames_[u.targets[t]].push_back({std::uint32_t(ui), std::uint32_t(t)});
    }
    freqs_.resize(info.classes);
    std::size_t total = 0;
    for (std::size_t k = 0; k < info.classes; ++k) {
      freqs_[k] = double(frames_[k].size());
      total += frames_[k].size();
    }
    if (total == 0)
      throw EmptyLanguageError("language " + std::to_string(language) + " has no frames");
    set_gamma(gamma);
  }

  std::uint16_t language() const { return language_; }
  double gamma() const { return gamma_; }
  const std::vector<double> &freqs() const { return freqs_; }
  const std::vector<double> &probs() const { return probs_; }
  const std::vector<FrameRef> &frames_of(std::size_t cls) const { return frames_.at(cls); }
  Rng &rng() { return rng_; }
  const Rng &rng() const { return rng_; }

  void set_gamma(double gamma) {
    if (gamma == gamma_ && !probs_.empty()) return;
    probs_ = class_probs(freqs_, gamma);
    gamma_ = gamma;
    cumulative_.resize(probs_.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < probs_.size(); ++k) cumulative_[k] = acc += probs_[k];
  }

  std::uint32_t draw_class() {
    const double r = rng_.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    std::size_t k = std::size_t(it - cumulative_.begin());
    if (k >= cumulative_.size()) k = cumulative_.size() - 1;
    while (frames_[k].empty()) --k; // only reachable through rounding at the top end
    return std::uint32_t(k);
  }

  std::pair<std::uint32_t, FrameRef> draw() {
    const auto k = draw_class();
    const auto &pool = frames_[k];
    return {k, pool[rng_.below(pool.size())]};
  }

private:
  std::uint16_t language_ = 0;
  double gamma_ = -1.0;
  std::vector<std::vector<FrameRef>> frames_;
  std::vector<double> freqs_;
  std::vector<double> probs_;
  std::vector<double> cumulative_;
  Rng rng_;
};

/// Network-ready mini-batch for one language.
struct Batch {
  std::uint16_t language = 0;
  Tensor<float> inputs; ///< N x channels x window x bins
  std::vector<std::uint32_t> targets;
};

/// Assembles input windows for explicit frames (used by sampling and by
/// natural-order evaluation).
inline Batch assemble_batch(const Corpus &corpus, std::uint16_t language,
                            std::span<const FrameRef> frames, const FeatureConfig &features) {
  if (frames.empty()) throw ContractError("batch needs at least one frame");
  const auto &first = corpus.utterances.at(frames.front().utterance);
  const auto geom = InputGeometry{features.multiscale.strides.size() * first.channels,
                                  features.multiscale.window(), first.bins};
  Batch b;
  b.language = language;
  b.inputs = Tensor<float>(Shape{frames.size(), geom.channels, geom.time, geom.freq});
  b.targets.resize(frames.size());
  const std::size_t per = geom.channels * geom.time * geom.freq;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto &u = corpus.utterances.at(frames[i].utterance);
    if (u.channels != first.channels)
      throw ContractError("utterances in one batch disagree on channel count");
    write_multiscale(u, frames[i].frame, features.multiscale, b.inputs.data().data() + i * per);
    b.targets[i] = u.targets[frames[i].frame];
  }
  return b;
}

/// Draws batch_size i.i.d. frames through the two-stage sampler.
inline Batch sample_batch(SamplerState &state, const Corpus &corpus, std::uint16_t language,
                          std::size_t batch_size, const FeatureConfig &features) {
  if (language != state.language())
    throw ContractError("sampler belongs to language " + std::to_string(state.language()) +
                        ", asked for " + std::to_string(language));
  if (!corpus.has_language(language))
    throw NotFoundError("language " + std::to_string(language) + " is not in the corpus");
  if (batch_size == 0) throw ContractError("batch size must be at least 1");
  std::vector<FrameRef> frames(batch_size);
  for (auto &f : frames) f = state.draw().second;
  return assemble_batch(corpus, language, frames, features);
}

} // namespace convlab
