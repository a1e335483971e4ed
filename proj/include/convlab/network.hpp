#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "convlab/arch.hpp"
#include "convlab/ops.hpp"

namespace convlab {

template <typename T> struct Layer {
  std::size_t index = 0; ///< position in the ArchConfig
  LayerSpec spec;
  Var<T> weight;
  Var<T> bias;

  Var<T> forward(const Var<T> &x, ConvAlgo algo) const {
    switch (spec.kind) {
    case LayerKind::conv: {
      auto y = conv2d<T>(x, ConvParams<T>{weight, bias, spec.pad_t, spec.pad_f}, algo);
      return spec.relu ? relu(y) : y;
    }
    case LayerKind::pool: return maxpool2d(x, PoolParams{spec.pool_t, spec.pool_f});
    case LayerKind::flatten: return flatten(x);
    case LayerKind::fc: {
      auto in = x.shape().size() == 2 ? x : flatten(x);
      auto y = affine(in, weight, bias);
      return spec.relu ? relu(y) : y;
    }
    case LayerKind::softmax: return x; // the loss applies the softmax
    }
    return x;
  }
};

/// A contiguous run of layers with their parameters.
template <typename T> class Sequential {
public:
  using Named = std::pair<std::string, Var<T>>;

  Sequential() = default;
  explicit Sequential(std::string prefix) : prefix_(std::move(prefix)) {}

  /// Builds layers [first, last) of cfg; seed_of(layer index) picks each
  /// weight layer's initialization seed.
  static Sequential build(const ArchConfig &cfg, const ShapeReport &shapes, std::size_t first,
                          std::size_t last, std::size_t output_width,
                          const std::function<std::uint64_t(std::size_t)> &seed_of,
                          std::string prefix) {
    Sequential s(std::move(prefix));
    for (std::size_t i = first; i < last; ++i) {
      Layer<T> layer;
      layer.index = i;
      layer.spec = cfg.layers[i];
      if (layer.spec.has_weights()) {
        auto wb = init_layer<T>(layer.spec, shapes.fan_in[i], output_width, seed_of(i));
        layer.weight = Var<T>::leaf(std::move(wb.weight), true);
        layer.bias = Var<T>::leaf(std::move(wb.bias), true);
      }
      s.layers_.push_back(std::move(layer));
    }
    return s;
  }

  Var<T> forward(Var<T> x, ConvAlgo algo = ConvAlgo::im2col) const {
    for (const auto &l : layers_) x = l.forward(x, algo);
    return x;
  }

  std::vector<Named> named_params() const {
    std::vector<Named> out;
    for (const auto &l : layers_)
      if (l.spec.has_weights()) {
        const std::string base = prefix_ + "." + std::to_string(l.index) + ".";
        out.emplace_back(base + "weight", l.weight);
        out.emplace_back(base + "bias", l.bias);
      }
    return out;
  }

  void zero_grad() {
    for (auto &[n, p] : named_params()) p.zero_grad();
  }

  std::vector<Layer<T>> &layers() { return layers_; }
  const std::vector<Layer<T>> &layers() const { return layers_; }
  const std::string &prefix() const { return prefix_; }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (auto &[name, p] : named_params()) n += p.value().numel();
    return n;
  }

private:
  std::string prefix_;
  std::vector<Layer<T>> layers_;
};

/// Whole architecture as a single stack (plain single-task model).
template <typename T>
Sequential<T> build_sequential(const ArchConfig &cfg, const InputGeometry &geom,
                               std::size_t output_width, std::uint64_t seed) {
  const auto shapes = infer_shapes(cfg, geom, output_width);
  return Sequential<T>::build(
      cfg, shapes, 0, cfg.layers.size(), output_width,
      [seed](std::size_t i) { return derive_seed(seed, i); }, "net");
}

} // namespace convlab
