#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "convlab/arch.hpp"
#include "convlab/features.hpp"
#include "convlab/network.hpp"
#include "convlab/optim.hpp"
#include "convlab/sampler.hpp"

namespace convlab {

/// Output width of each language's head, keyed by language id.
using LanguageTable = std::map<std::uint16_t, std::size_t>;

inline LanguageTable language_table(const Corpus &corpus) {
  LanguageTable t;
  for (const auto &l : corpus.languages) t[l.id] = l.classes;
  return t;
}

/// Shared stem (every conv/pool plus the first fc and its ReLU) feeding one
/// head per language (the remaining fc layers, output layer and softmax).
template <typename T> class MultilingualNetwork {
public:
  using Named = std::pair<std::string, Var<T>>;

  MultilingualNetwork() = default;

  MultilingualNetwork(ArchConfig cfg, InputGeometry geom, LanguageTable languages,
                      std::uint64_t seed)
      : cfg_(std::move(cfg)), geom_(geom), languages_(std::move(languages)) {
    if (languages_.empty()) throw ContractError("network needs at least one language");
    validate_arch(cfg_);
    const auto shapes = infer_shapes(cfg_, geom_, 1);
    stem_ = Sequential<T>::build(
        cfg_, shapes, 0, cfg_.untie_boundary, 0,
        [seed](std::size_t i) { return derive_seed(seed, "stem", i); }, "stem");
    for (const auto &[id, width] : languages_) {
      if (width == 0)
        throw ContractError("language " + std::to_string(id) + " has no output classes");
      heads_.emplace(id, Sequential<T>::build(
                             cfg_, shapes, cfg_.untie_boundary, cfg_.layers.size(), width,
                             [seed, id = id](std::size_t i) {
                               return derive_seed(derive_seed(seed, "head", id), i);
                             },
                             "head" + std::to_string(id)));
    }
  }

  const ArchConfig &config() const { return cfg_; }
  const InputGeometry &geometry() const { return geom_; }
  const LanguageTable &languages() const { return languages_; }
  Sequential<T> &stem() { return stem_; }
  const Sequential<T> &stem() const { return stem_; }

  bool has_head(std::uint16_t lang) const { return heads_.count(lang) != 0; }
  Sequential<T> &head(std::uint16_t lang) { return find_head(heads_, lang); }
  const Sequential<T> &head(std::uint16_t lang) const { return find_head(heads_, lang); }

  Var<T> forward(std::uint16_t lang, const Tensor<T> &inputs,
                 ConvAlgo algo = ConvAlgo::im2col) const {
    const auto &h = head(lang);
    return h.forward(stem_.forward(Var<T>::leaf(inputs), algo), algo);
  }

  /// Stem parameters first, then heads in language-id order.
  std::vector<Named> named_params() const {
    auto out = stem_.named_params();
    for (const auto &[id, h] : heads_) {
      auto hp = h.named_params();
      out.insert(out.end(), hp.begin(), hp.end());
    }
    return out;
  }

  void zero_grad() {
    stem_.zero_grad();
    for (auto &[id, h] : heads_) h.zero_grad();
  }

private:
  template <typename Map> static auto &find_head(Map &heads, std::uint16_t lang) {
    auto it = heads.find(lang);
    if (it == heads.end())
      throw NotFoundError("no head for language " + std::to_string(lang));
    return it->second;
  }

  ArchConfig cfg_;
  InputGeometry geom_;
  LanguageTable languages_;
  Sequential<T> stem_;
  std::map<std::uint16_t, Sequential<T>> heads_;
};

/// Places the untie boundary so the last `untied_fc` fc layers are
/// per-language and builds the network. The first fc must stay shared.
template <typename T>
MultilingualNetwork<T> partition_network(ArchConfig cfg, std::size_t untied_fc,
                                         const InputGeometry &geom,
                                         const LanguageTable &languages, std::uint64_t seed) {
  const std::size_t fcs = cfg.fc_indices().size();
  if (untied_fc < 1)
    throw ContractError("at least the output layer must be untied (asked for " +
                        std::to_string(untied_fc) + ")");
  if (untied_fc >= fcs)
    throw ContractError("cannot untie " + std::to_string(untied_fc) + " of " +
                        std::to_string(fcs) +
                        " fc layers: the first fully connected layer must stay shared");
  set_untied_fc(cfg, untied_fc);
  return MultilingualNetwork<T>(std::move(cfg), geom, languages, seed);
}

/// Forward and backward for one batch per language, in language-id order.
/// Shared-stem gradients add up across languages; each head only sees its
/// own language. Returns the per-language (unweighted) mean losses.
/// Gradients are not zeroed first.
template <typename T>
std::map<std::uint16_t, double>
accumulate_gradients(MultilingualNetwork<T> &net, std::span<const Batch> batches,
                     const std::map<std::uint16_t, T> &loss_weights = {},
                     ConvAlgo algo = ConvAlgo::im2col) {
  std::map<std::uint16_t, const Batch *> by_lang;
  for (const auto &b : batches) {
    if (!net.has_head(b.language))
      throw ContractError("batch for unregistered language " + std::to_string(b.language));
    if (!by_lang.emplace(b.language, &b).second)
      throw ContractError("two batches for language " + std::to_string(b.language));
  }
  for (const auto &[id, width] : net.languages())
    if (!by_lang.count(id))
      throw ContractError("missing batch for language " + std::to_string(id));

  std::map<std::uint16_t, double> losses;
  for (const auto &[id, batch] : by_lang) {
    Tensor<T> inputs;
    if constexpr (std::is_same_v<T, float>) {
      inputs = batch->inputs;
    } else {
      inputs = Tensor<T>(batch->inputs.shape());
      for (std::size_t i = 0; i < inputs.numel(); ++i) inputs[i] = T(batch->inputs[i]);
    }
    auto logits = net.forward(id, inputs, algo);
    auto out = softmax_xent<T>(logits, batch->targets);
    losses[id] = double(out.loss.value()[0]);
    auto it = loss_weights.find(id);
    Var<T> root = it == loss_weights.end() ? out.loss : scale(out.loss, it->second);
    backward(root);
  }
  return losses;
}

/// One multilingual update: zero gradients, accumulate one batch per
/// language, then a single optimizer step over every parameter.
template <typename T>
std::map<std::uint16_t, double> round_robin_update(MultilingualNetwork<T> &net,
                                                   std::span<const Batch> batches,
                                                   Optimizer<T> &optimizer) {
  optimizer.zero_grad();
  net.zero_grad();
  auto losses = accumulate_gradients(net, batches);
  optimizer.step();
  return losses;
}

struct EvalResult {
  double accuracy = 0.0;
  double cross_entropy = 0.0;
  std::size_t frames = 0;
};

/// Frame accuracy and mean cross-entropy over every frame of one language,
/// in corpus order.
template <typename T>
EvalResult evaluate(const MultilingualNetwork<T> &net, const Corpus &corpus,
                    std::uint16_t language, const FeatureConfig &features,
                    std::size_t chunk = 256) {
  if (!net.has_head(language))
    throw NotFoundError("no head for language " + std::to_string(language));
  NoGradGuard no_grad;
  EvalResult r;
  std::size_t correct = 0;
  double ce = 0.0;
  std::vector<FrameRef> frames;
  auto flush = [&] {
    if (frames.empty()) return;
    auto batch = assemble_batch(corpus, language, frames, features);
    Tensor<T> inputs;
    if constexpr (std::is_same_v<T, float>) {
      inputs = std::move(batch.inputs);
    } else {
      inputs = Tensor<T>(batch.inputs.shape());
      for (std::size_t i = 0; i < inputs.numel(); ++i) inputs[i] = T(batch.inputs[i]);
    }
    auto logits = net.forward(language, inputs);
    auto out = softmax_xent<T>(logits, batch.targets);
    const std::size_t K = logits.shape()[1];
    for (std::size_t n = 0; n < frames.size(); ++n) {
      auto row = logits.value().data().subspan(n * K, K);
      const auto best = std::size_t(std::max_element(row.begin(), row.end()) - row.begin());
      correct += best == batch.targets[n];
    }
    ce += double(out.loss.value()[0]) * double(frames.size());
    r.frames += frames.size();
    frames.clear();
  };
  for (std::size_t ui = 0; ui < corpus.utterances.size(); ++ui) {
    const auto &u = corpus.utterances[ui];
    if (u.language != language) continue;
    for (std::size_t t = 0; t < u.frames; ++t) {
      frames.push_back({std::uint32_t(ui), std::uint32_t(t)});
      if (frames.size() == chunk) flush();
    }
  }
  flush();
  if (r.frames) {
    r.accuracy = double(correct) / double(r.frames);
    r.cross_entropy = ce / double(r.frames);
  }
  return r;
}

} // namespace convlab
