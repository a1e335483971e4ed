#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "convlab/arch.hpp"
#include "convlab/errors.hpp"
#include "convlab/tensor.hpp"

namespace convlab {

/// Frames of one utterance stored channels x time x bins, with one class
/// target per frame.
struct Utterance {
  std::uint16_t language = 0;
  std::size_t channels = 1;
  std::size_t frames = 0;
  std::size_t bins = 40;
  std::vector<float> data;
  std::vector<std::uint32_t> targets;

  float at(std::size_t c, std::size_t t, std::size_t b) const {
    return data[(c * frames + t) * bins + b];
  }
  float &at(std::size_t c, std::size_t t, std::size_t b) {
    return data[(c * frames + t) * bins + b];
  }
  const float *frame(std::size_t c, std::size_t t) const {
    return data.data() + (c * frames + t) * bins;
  }

  friend bool operator==(const Utterance &, const Utterance &) = default;
};

struct LanguageInfo {
  std::uint16_t id = 0;
  std::string name;
  std::size_t classes = 0;

  friend bool operator==(const LanguageInfo &, const LanguageInfo &) = default;
};

struct Corpus {
  std::size_t mel_bins = 40;
  std::uint64_t seed = 0;
  std::vector<LanguageInfo> languages;
  std::vector<Utterance> utterances;

  const LanguageInfo &language(std::uint16_t id) const {
    for (const auto &l : languages)
      if (l.id == id) return l;
    throw NotFoundError("language " + std::to_string(id) + " is not in the corpus");
  }
  bool has_language(std::uint16_t id) const {
    return std::any_of(languages.begin(), languages.end(),
                       [id](const LanguageInfo &l) { return l.id == id; });
  }
  std::size_t frames(std::uint16_t id) const {
    std::size_t n = 0;
    for (const auto &u : utterances)
      if (u.language == id) n += u.frames;
    return n;
  }
  std::size_t total_frames() const {
    std::size_t n = 0;
    for (const auto &u : utterances) n += u.frames;
    return n;
  }
  /// Frame count per class for one language.
  std::vector<double> class_counts(std::uint16_t id) const {
    std::vector<double> counts(language(id).classes, 0.0);
    for (const auto &u : utterances)
      if (u.language == id)
        for (auto t : u.targets) counts[t] += 1.0;
    return counts;
  }

  friend bool operator==(const Corpus &, const Corpus &) = default;
};

/// Throws ContractError on the first broken invariant.
inline void validate_corpus(const Corpus &c) {
  for (std::size_t i = 0; i < c.utterances.size(); ++i) {
    const auto &u = c.utterances[i];
    const std::string where = "utterance " + std::to_string(i);
    if (u.targets.size() != u.frames)
      throw ContractError(where + ": " + std::to_string(u.targets.size()) + " targets for " +
                          std::to_string(u.frames) + " frames");
    if (u.data.size() != u.channels * u.frames * u.bins)
      throw ContractError(where + ": frame data size does not match its extents");
    if (u.bins != c.mel_bins)
      throw ContractError(where + ": " + std::to_string(u.bins) + " bins, corpus has " +
                          std::to_string(c.mel_bins));
    const std::size_t classes = c.language(u.language).classes;
    for (auto t : u.targets)
      if (t >= classes)
        throw ContractError(where + ": target " + std::to_string(t) + " >= class count " +
                            std::to_string(classes));
  }
}

/// Multi-scale window layout: scale s holds frames t - s*C ... t + s*C in
/// steps of s, so every map has 2C+1 rows regardless of the stride.
struct MultiScaleSpec {
  std::size_t context = 8;
  std::vector<std::size_t> strides{1};

  std::size_t window() const { return 2 * context + 1; }

  /// Notation "3S/20": three scales {1,2,4} with context 20; "1S/8" plain.
  static MultiScaleSpec parse(std::string_view text) {
    const auto t = detail::trim(text);
    const auto s = t.find('S');
    const auto slash = t.find('/');
    if (s == std::string::npos || slash == std::string::npos || slash != s + 1)
      throw ContractError("multi-scale spec must look like nS/C, got '" + t + "'");
    auto n = detail::parse_count(std::string_view(t).substr(0, s));
    auto c = detail::parse_count(std::string_view(t).substr(slash + 1));
    if (!n || !c || *n == 0 || *n > 16)
      throw ContractError("bad multi-scale spec '" + t + "'");
    MultiScaleSpec spec;
    spec.context = *c;
    spec.strides.clear();
    for (std::size_t i = 0; i < *n; ++i) spec.strides.push_back(std::size_t(1) << i);
    return spec;
  }

  void validate() const {
    if (strides.empty() || strides.front() != 1)
      throw ContractError("multi-scale strides must start at 1");
    for (std::size_t i = 1; i < strides.size(); ++i)
      if (strides[i] <= strides[i - 1])
        throw ContractError("multi-scale strides must be strictly increasing");
  }
};

/// Writes the stacked maps for center frame t into out, laid out
/// (scale, channel) x window x bins. Indices outside the utterance clamp to
/// its first or last frame.
inline void write_multiscale(const Utterance &u, std::size_t t, const MultiScaleSpec &spec,
                             float *out) {
  const std::ptrdiff_t last = std::ptrdiff_t(u.frames) - 1;
  const std::ptrdiff_t C = std::ptrdiff_t(spec.context);
  for (std::size_t si = 0; si < spec.strides.size(); ++si) {
    const std::ptrdiff_t s = std::ptrdiff_t(spec.strides[si]);
    for (std::size_t c = 0; c < u.channels; ++c)
      for (std::ptrdiff_t k = -C; k <= C; ++k) {
        const std::ptrdiff_t src = std::clamp(std::ptrdiff_t(t) + s * k, std::ptrdiff_t(0), last);
        const float *f = u.frame(c, std::size_t(src));
        std::copy(f, f + u.bins, out);
        out += u.bins;
      }
  }
}

inline Tensor<float> build_multiscale(const Utterance &u, std::size_t t,
                                      const MultiScaleSpec &spec) {
  spec.validate();
  if (u.frames == 0) throw ContractError("utterance has no frames");
  if (t >= u.frames)
    throw IndexError("center frame " + std::to_string(t) + " outside utterance of " +
                     std::to_string(u.frames) + " frames");
  Tensor<float> out(Shape{spec.strides.size() * u.channels, spec.window(), u.bins});
  write_multiscale(u, t, spec, out.data().data());
  return out;
}

/// Regression deltas with window 2 and clamped edges, applied to each
/// channel/bin series: d_t = sum_n n (x_{t+n} - x_{t-n}) / (2 sum_n n^2).
inline std::vector<float> delta_series(std::span<const float> x, std::size_t frames,
                                       std::size_t stride) {
  std::vector<float> d(frames * stride);
  const std::ptrdiff_t last = std::ptrdiff_t(frames) - 1;
  auto clamp = [&](std::ptrdiff_t i) { return std::size_t(std::clamp<std::ptrdiff_t>(i, 0, last)); };
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t b = 0; b < stride; ++b) {
      double acc = 0.0;
      for (std::ptrdiff_t n = 1; n <= 2; ++n)
        acc += double(n) * (double(x[clamp(std::ptrdiff_t(t) + n) * stride + b]) -
                            double(x[clamp(std::ptrdiff_t(t) - n) * stride + b]));
      d[t * stride + b] = float(acc / 10.0);
    }
  return d;
}

/// Static, delta and delta-delta channels: c input channels become 3c.
inline Utterance add_deltas(const Utterance &u) {
  if (u.frames == 0) throw ContractError("add_deltas needs at least one frame");
  Utterance out = u;
  out.channels = 3 * u.channels;
  out.data.resize(out.channels * u.frames * u.bins);
  const std::size_t plane = u.frames * u.bins;
  for (std::size_t c = 0; c < u.channels; ++c) {
    std::span<const float> x(u.data.data() + c * plane, plane);
    const auto d = delta_series(x, u.frames, u.bins);
    const auto dd = delta_series(d, u.frames, u.bins);
    std::copy(d.begin(), d.end(), out.data.begin() + (u.channels + c) * plane);
    std::copy(dd.begin(), dd.end(), out.data.begin() + (2 * u.channels + c) * plane);
  }
  return out;
}

inline void add_deltas(Corpus &corpus) {
  for (auto &u : corpus.utterances) u = add_deltas(u);
}

/// Global per-(channel, bin) statistics pooled over every language.
struct NormStats {
  std::size_t channels = 1;
  std::size_t bins = 0;
  std::vector<double> mean;
  std::vector<double> var;
};

inline NormStats compute_norm_stats(const Corpus &corpus) {
  if (corpus.utterances.empty()) throw ContractError("cannot normalize an empty corpus");
  NormStats st;
  st.channels = corpus.utterances.front().channels;
  st.bins = corpus.utterances.front().bins;
  const std::size_t dims = st.channels * st.bins;
  st.mean.assign(dims, 0.0);
  st.var.assign(dims, 0.0);
  double n = 0.0;
  for (const auto &u : corpus.utterances) {
    if (u.channels != st.channels || u.bins != st.bins)
      throw ContractError("utterances disagree on channel or bin count");
    n += double(u.frames);
    for (std::size_t c = 0; c < u.channels; ++c)
      for (std::size_t t = 0; t < u.frames; ++t)
        for (std::size_t b = 0; b < u.bins; ++b) st.mean[c * st.bins + b] += u.at(c, t, b);
  }
  if (n == 0.0) throw ContractError("cannot normalize a corpus without frames");
  for (auto &m : st.mean) m /= n;
  for (const auto &u : corpus.utterances)
    for (std::size_t c = 0; c < u.channels; ++c)
      for (std::size_t t = 0; t < u.frames; ++t)
        for (std::size_t b = 0; b < u.bins; ++b) {
          const double d = u.at(c, t, b) - st.mean[c * st.bins + b];
          st.var[c * st.bins + b] += d * d;
        }
  for (std::size_t i = 0; i < dims; ++i) {
    st.var[i] /= n;
    if (!(st.var[i] > 1e-12 * std::max(1.0, st.mean[i] * st.mean[i])))
      throw DegenerateFeatureError(i, "feature bin " + std::to_string(i % st.bins) +
                                          " (channel " + std::to_string(i / st.bins) +
                                          ") has zero variance");
  }
  return st;
}

inline void apply_norm(const NormStats &st, Corpus &corpus) {
  for (auto &u : corpus.utterances) {
    if (u.channels != st.channels || u.bins != st.bins)
      throw ContractError("normalization statistics do not match utterance layout");
    for (std::size_t c = 0; c < u.channels; ++c)
      for (std::size_t t = 0; t < u.frames; ++t)
        for (std::size_t b = 0; b < u.bins; ++b) {
          const std::size_t i = c * st.bins + b;
          u.at(c, t, b) = float((u.at(c, t, b) - st.mean[i]) / std::sqrt(st.var[i]));
        }
  }
}

/// Standardizes the corpus in place with one shared mean and variance per
/// bin and returns the statistics used.
inline NormStats normalize(Corpus &corpus) {
  auto st = compute_norm_stats(corpus);
  apply_norm(st, corpus);
  return st;
}

/// How frames become network inputs.
struct FeatureConfig {
  MultiScaleSpec multiscale;
  bool deltas = false;

  std::size_t base_channels() const { return deltas ? 3 : 1; }

  InputGeometry geometry(std::size_t bins) const {
    return {multiscale.strides.size() * base_channels(), multiscale.window(), bins};
  }
};

/// Normalizes the static features and appends delta channels if requested.
inline NormStats prepare_corpus(Corpus &corpus, const FeatureConfig &fc) {
  auto st = normalize(corpus);
  if (fc.deltas) add_deltas(corpus);
  return st;
}

/// Applies previously computed statistics (e.g. training-set ones to a
/// held-out corpus).
inline void prepare_corpus(Corpus &corpus, const FeatureConfig &fc, const NormStats &st) {
  apply_norm(st, corpus);
  if (fc.deltas) add_deltas(corpus);
}

} // namespace convlab
