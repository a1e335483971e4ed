#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "convlab/errors.hpp"
#include "convlab/features.hpp"
#include "convlab/rng.hpp"

namespace convlab {

struct SyntheticOptions {
  /// Standard deviation of the white noise added to every bin.
  double noise = 1.0;
  /// Amplitude of the language-specific bump added to each class prototype.
  double language_variation = 0.35;
  /// Class weights are drawn log-uniformly in [1, frequency_ratio].
  double frequency_ratio = 30.0;
  std::size_t min_segment = 3;
  std::size_t max_segment = 9;
  std::size_t min_utterance = 150;
  std::size_t max_utterance = 400;
  /// Independent utterance streams drawn from the same prototypes and class
  /// weights (0 = training data, 1 = held-out, ...).
  std::uint64_t split = 0;
  /// Per-language frame counts; overrides the uniform count when non-empty.
  std::vector<std::size_t> frames_per_language;
};

namespace detail {

struct Bump {
  double center, width, amplitude, drift;
};

/// A class prototype: a few spectral bumps whose centers drift linearly
/// across the segment, so the pattern spans time as well as frequency.
struct Prototype {
  std::vector<Bump> bumps;

  void render(double progress, std::size_t bins, float *out) const {
    for (std::size_t b = 0; b < bins; ++b) {
      double v = 0.0;
      for (const auto &k : bumps) {
        const double c = k.center + k.drift * (progress - 0.5);
        const double z = (double(b) - c) / k.width;
        v += k.amplitude * std::exp(-0.5 * z * z);
      }
      out[b] = float(v);
    }
  }
};

inline Bump random_bump(Rng &rng, std::size_t bins, double amp_lo, double amp_hi) {
  return {rng.uniform(0.0, double(bins)), rng.uniform(1.5, 4.0), rng.uniform(amp_lo, amp_hi),
          rng.uniform(-6.0, 6.0)};
}

} // namespace detail

/// Deterministic stand-in for a labelled multilingual frame corpus.
///
/// All languages draw their classes from one shared bank of spectro-temporal
/// prototypes (permuted per language and perturbed by a small
/// language-specific bump), so lower layers learned on one language transfer
/// to the others. Utterances are runs of class segments of random duration
/// plus white noise and a per-utterance gain offset. Class weights are
/// log-uniform, giving a visibly skewed frequency histogram.
inline Corpus gen_synthetic_corpus(std::size_t num_languages, std::size_t classes_per_language,
                                   std::size_t frames_per_language, std::size_t mel_bins,
                                   std::uint64_t seed, const SyntheticOptions &opt = {}) {
  if (num_languages == 0 || classes_per_language == 0 || mel_bins == 0)
    throw ContractError("synthetic corpus counts must be positive");
  if (num_languages > 65535) throw ContractError("too many languages");
  if (!opt.frames_per_language.empty() && opt.frames_per_language.size() != num_languages)
    throw ContractError("frames_per_language needs one entry per language");
  if (opt.frames_per_language.empty() && frames_per_language == 0)
    throw ContractError("synthetic corpus counts must be positive");
  if (opt.min_segment == 0 || opt.max_segment < opt.min_segment || opt.min_utterance == 0 ||
      opt.max_utterance < opt.min_utterance)
    throw ContractError("synthetic segment/utterance length ranges are invalid");

  Corpus corpus;
  corpus.mel_bins = mel_bins;
  corpus.seed = seed;

  Rng bank_rng(derive_seed(seed, "prototypes"));
  std::vector<detail::Prototype> bank(classes_per_language);
  for (auto &p : bank) {
    const std::size_t n = 2 + bank_rng.below(2);
    for (std::size_t k = 0; k < n; ++k) p.bumps.push_back(detail::random_bump(bank_rng, mel_bins, 0.6, 1.4));
  }

  for (std::size_t l = 0; l < num_languages; ++l) {
    const auto lang = static_cast<std::uint16_t>(l);
    corpus.languages.push_back({lang, "L" + std::to_string(l), classes_per_language});

    Rng world(derive_seed(seed, "language", l));
    std::vector<std::size_t> perm(classes_per_language);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[world.below(i)]);
    std::vector<detail::Prototype> protos(classes_per_language);
    std::vector<double> cumulative(classes_per_language);
    double acc = 0.0;
    for (std::size_t k = 0; k < classes_per_language; ++k) {
      protos[k] = bank[perm[k]];
      protos[k].bumps.push_back(detail::random_bump(world, mel_bins, opt.language_variation,
                                                    opt.language_variation));
      acc += std::exp(world.uniform() * std::log(opt.frequency_ratio));
      cumulative[k] = acc;
    }

    Rng rng(derive_seed(seed, "utterances", l * 65536 + opt.split));
    const std::size_t budget =
        opt.frames_per_language.empty() ? frames_per_language : opt.frames_per_language[l];
    std::size_t produced = 0;
    while (produced < budget) {
      const std::size_t len = std::min(
          budget - produced,
          opt.min_utterance + rng.below(opt.max_utterance - opt.min_utterance + 1));
      Utterance u;
      u.language = lang;
      u.bins = mel_bins;
      u.frames = len;
      u.data.resize(len * mel_bins);
      u.targets.resize(len);
      const double gain = 0.3 * rng.normal();
      std::size_t t = 0;
      while (t < len) {
        const double r = rng.uniform() * acc;
        const std::size_t k = std::size_t(
            std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
        const std::size_t cls = std::min(k, classes_per_language - 1);
        const std::size_t dur =
            opt.min_segment + rng.below(opt.max_segment - opt.min_segment + 1);
        for (std::size_t j = 0; j < dur && t < len; ++j, ++t) {
          float *frame = u.data.data() + t * mel_bins;
          protos[cls].render((double(j) + 0.5) / double(dur), mel_bins, frame);
          for (std::size_t b = 0; b < mel_bins; ++b)
            frame[b] += float(gain + opt.noise * rng.normal());
          u.targets[t] = std::uint32_t(cls);
        }
      }
      produced += len;
      corpus.utterances.push_back(std::move(u));
    }
  }
  return corpus;
}

} // namespace convlab
