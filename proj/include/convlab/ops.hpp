#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "convlab/autodiff.hpp"
#include "convlab/kernels.hpp"

namespace convlab {

enum class ConvAlgo { direct, im2col };

template <typename T> struct ConvParams {
  Var<T> kernels; ///< outMaps x inMaps x kH x kW
  Var<T> bias;    ///< outMaps
  std::size_t pad_t = 0;
  std::size_t pad_f = 0;
};

struct PoolParams {
  std::size_t pool_t = 1;
  std::size_t pool_f = 1;
};

/// Stride-1 cross-correlation with zero padding, plus bias.
template <typename T>
Var<T> conv2d(const Var<T> &input, const ConvParams<T> &params,
              ConvAlgo algo = ConvAlgo::im2col) {
  const auto &w = params.kernels.value();
  const auto &b = params.bias.value();
  const auto g = kernels::conv_geometry(input.shape(), w.shape(), params.pad_t, params.pad_f);
  if (b.rank() != 1 || b.numel() != g.out_maps)
    throw DimensionError("conv2d bias must have " + std::to_string(g.out_maps) +
                         " entries, got shape " + shape_string(b.shape()));
  Tensor<T> out(Shape{g.batch, g.out_maps, g.out_t, g.out_f});
  auto cols = std::make_shared<std::vector<T>>();
  if (algo == ConvAlgo::direct)
    kernels::conv_direct_forward<T>(g, input.value().data(), w.data(), b.data(), out.data());
  else
    kernels::conv_im2col_forward<T>(g, input.value().data(), w.data(), b.data(), out.data(),
                                    *cols);
  return make_result<T>(
      std::move(out), {input, params.kernels, params.bias},
      [g, algo, cols](Node<T> &self) {
        auto &x = self.parents[0];
        auto &w = self.parents[1];
        auto dx = grad_of(x), dw = grad_of(w), db = grad_of(self.parents[2]);
        std::span<const T> dy = self.value.grad();
        if (algo == ConvAlgo::direct)
          kernels::conv_direct_backward<T>(g, x->value.data(), w->value.data(), dy, dx, dw, db);
        else
          kernels::conv_im2col_backward<T>(g, w->value.data(), *cols, dy, dx, dw, db);
      });
}

template <typename T> Var<T> maxpool2d(const Var<T> &input, const PoolParams &params) {
  const auto g = kernels::pool_geometry(input.shape(), params.pool_t, params.pool_f);
  Tensor<T> out(Shape{g.batch, g.maps, g.out_t, g.out_f});
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.numel());
  kernels::maxpool_forward<T>(g, input.value().data(), out.data(), *argmax);
  return make_result<T>(std::move(out), {input}, [argmax](Node<T> &self) {
    auto dx = grad_of(self.parents[0]);
    std::span<const T> dy = self.value.grad();
    for (std::size_t i = 0; i < dy.size(); ++i) dx[(*argmax)[i]] += dy[i];
  });
}

template <typename T> Var<T> relu(const Var<T> &input) {
  Tensor<T> out(input.shape());
  auto x = input.value().data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return make_result<T>(std::move(out), {input}, [](Node<T> &self) {
    auto &p = self.parents[0];
    auto dx = grad_of(p);
    auto x = p->value.data();
    std::span<const T> dy = self.value.grad();
    for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += x[i] > T(0) ? dy[i] : T(0);
  });
}

/// x (N x D) times weight (D x H) plus bias (H).
template <typename T>
Var<T> affine(const Var<T> &input, const Var<T> &weight, const Var<T> &bias) {
  const auto &xs = input.shape();
  const auto &ws = weight.shape();
  if (xs.size() != 2) throw DimensionError("affine input must be N x D, got " + shape_string(xs));
  if (ws.size() != 2) throw DimensionError("affine weight must be D x H, got " + shape_string(ws));
  if (xs[1] != ws[0])
    throw DimensionError("affine inner dimension: input has " + std::to_string(xs[1]) +
                         ", weight expects " + std::to_string(ws[0]));
  if (bias.value().rank() != 1 || bias.value().numel() != ws[1])
    throw DimensionError("affine bias must have " + std::to_string(ws[1]) +
                         " entries, got shape " + shape_string(bias.shape()));
  const std::size_t N = xs[0], D = xs[1], H = ws[1];
  Tensor<T> out(Shape{N, H});
  {
    kernels::MatMap<T> Y(out.data().data(), N, H);
    Y.noalias() = kernels::ConstMatMap<T>(input.value().data().data(), N, D) *
                  kernels::ConstMatMap<T>(weight.value().data().data(), D, H);
    auto b = bias.value().data();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t h = 0; h < H; ++h) Y(n, h) += b[h];
  }
  return make_result<T>(std::move(out), {input, weight, bias}, [N, D, H](Node<T> &self) {
    auto &x = self.parents[0];
    auto &w = self.parents[1];
    auto dx = grad_of(x), dw = grad_of(w), db = grad_of(self.parents[2]);
    const kernels::ConstMatMap<T> dY(self.value.grad().data(), N, H);
    if (!dx.empty())
      kernels::MatMap<T>(dx.data(), N, D).noalias() +=
          dY * kernels::ConstMatMap<T>(w->value.data().data(), D, H).transpose();
    if (!dw.empty())
      kernels::MatMap<T>(dw.data(), D, H).noalias() +=
          kernels::ConstMatMap<T>(x->value.data().data(), N, D).transpose() * dY;
    if (!db.empty())
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t h = 0; h < H; ++h) db[h] += dY(n, h);
  });
}

/// N x ... -> N x (product of the rest).
template <typename T> Var<T> flatten(const Var<T> &input) {
  const auto &s = input.shape();
  if (s.empty()) throw DimensionError("cannot flatten a rank-0 tensor");
  const std::size_t rest = input.value().numel() / s[0];
  return make_result<T>(input.value().reshaped(Shape{s[0], rest}), {input},
                        [](Node<T> &self) {
                          auto dx = grad_of(self.parents[0]);
                          std::span<const T> dy = self.value.grad();
                          for (std::size_t i = 0; i < dy.size(); ++i) dx[i] += dy[i];
                        });
}

template <typename T> struct SoftmaxXent {
  Var<T> loss;     ///< mean cross-entropy, shape {1}
  Tensor<T> probs; ///< N x K
};

/// Mean softmax cross-entropy against integer class targets.
template <typename T>
SoftmaxXent<T> softmax_xent(const Var<T> &logits, std::span<const std::uint32_t> targets) {
  const auto &s = logits.shape();
  if (s.size() != 2) throw DimensionError("softmax_xent logits must be N x K, got " + shape_string(s));
  const std::size_t N = s[0], K = s[1];
  if (targets.size() != N)
    throw DimensionError("softmax_xent: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(N) + " rows");
  for (std::size_t r = 0; r < N; ++r)
    if (targets[r] >= K)
      throw IndexError("target " + std::to_string(targets[r]) + " at row " + std::to_string(r) +
                       " is outside [0, " + std::to_string(K) + ")");
  Tensor<T> probs(Shape{N, K});
  const double total = kernels::softmax_rows<T>(N, K, logits.value().data(), targets, probs.data());
  auto saved = std::make_shared<Tensor<T>>(probs);
  auto tgt = std::make_shared<std::vector<std::uint32_t>>(targets.begin(), targets.end());
  Var<T> loss = make_result<T>(Tensor<T>::scalar(T(total / double(N))), {logits},
                               [saved, tgt, N, K](Node<T> &self) {
                                 auto dz = grad_of(self.parents[0]);
                                 const T up = self.value.grad()[0] / T(N);
                                 auto p = saved->data();
                                 for (std::size_t r = 0; r < N; ++r)
                                   for (std::size_t k = 0; k < K; ++k) {
                                     const T onehot = (*tgt)[r] == k ? T(1) : T(0);
                                     dz[r * K + k] += up * (p[r * K + k] - onehot);
                                   }
                               });
  return {std::move(loss), std::move(probs)};
}

// Small elementwise helpers used by tests and loss weighting.

template <typename T> Var<T> mul(const Var<T> &a, const Var<T> &b) {
  if (a.shape() != b.shape())
    throw DimensionError("mul shapes differ: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T> &self) {
    auto &pa = self.parents[0];
    auto &pb = self.parents[1];
    std::span<const T> dy = self.value.grad();
    // Read values before touching gradients: pa and pb may be the same node.
    auto da = grad_of(pa);
    auto db = grad_of(pb);
    for (std::size_t i = 0; i < dy.size(); ++i) {
      const T va = pa->value[i], vb = pb->value[i];
      if (!da.empty()) da[i] += dy[i] * vb;
      if (!db.empty()) db[i] += dy[i] * va;
    }
  });
}

template <typename T> Var<T> add(const Var<T> &a, const Var<T> &b) {
  if (a.shape() != b.shape())
    throw DimensionError("add shapes differ: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_result<T>(std::move(out), {a, b}, [](Node<T> &self) {
    std::span<const T> dy = self.value.grad();
    for (int k = 0; k < 2; ++k) {
      auto d = grad_of(self.parents[k]);
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
    }
  });
}

template <typename T> Var<T> scale(const Var<T> &a, T factor) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * factor;
  return make_result<T>(std::move(out), {a}, [factor](Node<T> &self) {
    auto d = grad_of(self.parents[0]);
    std::span<const T> dy = self.value.grad();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i] * factor;
  });
}

template <typename T> Var<T> sum(const Var<T> &a) {
  T acc = T(0);
  for (T v : a.value().data()) acc += v;
  return make_result<T>(Tensor<T>::scalar(acc), {a}, [](Node<T> &self) {
    auto d = grad_of(self.parents[0]);
    const T up = self.value.grad()[0];
    for (auto &v : d) v += up;
  });
}

/// sum(a * weights) for a constant weight tensor; projects any op to a scalar.
template <typename T> Var<T> weighted_sum(const Var<T> &a, const Tensor<T> &weights) {
  if (a.value().numel() != weights.numel())
    throw DimensionError("weighted_sum needs " + std::to_string(a.value().numel()) +
                         " weights, got " + std::to_string(weights.numel()));
  T acc = T(0);
  for (std::size_t i = 0; i < weights.numel(); ++i) acc += a.value()[i] * weights[i];
  auto w = std::make_shared<Tensor<T>>(weights);
  return make_result<T>(Tensor<T>::scalar(acc), {a}, [w](Node<T> &self) {
    auto d = grad_of(self.parents[0]);
    const T up = self.value.grad()[0];
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += up * (*w)[i];
  });
}

} // namespace convlab
