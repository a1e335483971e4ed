#pragma once

// Raw forward/backward kernels on contiguous NCHW buffers. The graph ops in
// ops.hpp wrap these; tests call them directly for the path-equivalence checks.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convlab/errors.hpp"
#include "convlab/parallel.hpp"
#include "convlab/tensor.hpp"

namespace convlab::kernels {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T> using MatMap = Eigen::Map<RowMat<T>>;
template <typename T> using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct ConvGeom {
  std::size_t batch, in_maps, in_t, in_f;
  std::size_t out_maps, k_t, k_f;
  std::size_t pad_t, pad_f;
  std::size_t out_t, out_f;

  std::size_t patch() const { return in_maps * k_t * k_f; }
  std::size_t out_pixels() const { return out_t * out_f; }
};

inline ConvGeom conv_geometry(const Shape &input, const Shape &kernels,
                              std::size_t pad_t, std::size_t pad_f) {
  if (input.size() != 4)
    throw DimensionError("conv2d input must be N x C x T x F, got " + shape_string(input));
  if (kernels.size() != 4)
    throw DimensionError("conv2d kernels must be out x in x kH x kW, got " +
                         shape_string(kernels));
  if (input[1] != kernels[1])
    throw DimensionError("conv2d axis 1 (input maps): input has " +
                         std::to_string(input[1]) + ", kernels expect " +
                         std::to_string(kernels[1]));
  ConvGeom g{input[0], input[1], input[2], input[3], kernels[0], kernels[2], kernels[3],
             pad_t,    pad_f,    0,        0};
  const std::size_t pt = g.in_t + 2 * pad_t, pf = g.in_f + 2 * pad_f;
  if (pt < g.k_t)
    throw GeometryError("conv2d time axis: padded extent " + std::to_string(pt) +
                        " is smaller than kernel height " + std::to_string(g.k_t));
  if (pf < g.k_f)
    throw GeometryError("conv2d frequency axis: padded extent " + std::to_string(pf) +
                        " is smaller than kernel width " + std::to_string(g.k_f));
  g.out_t = pt - g.k_t + 1;
  g.out_f = pf - g.k_f + 1;
  return g;
}

/// Straight seven-loop cross-correlation. Slow; serves as the oracle for the
/// im2col path.
template <typename T>
void conv_direct_forward(const ConvGeom &g, std::span<const T> x, std::span<const T> w,
                         std::span<const T> b, std::span<T> y) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_maps; ++o)
      for (std::size_t t = 0; t < g.out_t; ++t)
        for (std::size_t f = 0; f < g.out_f; ++f) {
          T acc = b[o];
          for (std::size_t c = 0; c < g.in_maps; ++c)
            for (std::size_t i = 0; i < g.k_t; ++i) {
              const std::ptrdiff_t st = std::ptrdiff_t(t + i) - std::ptrdiff_t(g.pad_t);
              if (st < 0 || st >= std::ptrdiff_t(g.in_t)) continue;
              for (std::size_t j = 0; j < g.k_f; ++j) {
                const std::ptrdiff_t sf = std::ptrdiff_t(f + j) - std::ptrdiff_t(g.pad_f);
                if (sf < 0 || sf >= std::ptrdiff_t(g.in_f)) continue;
                acc += x[((n * g.in_maps + c) * g.in_t + st) * g.in_f + sf] *
                       w[((o * g.in_maps + c) * g.k_t + i) * g.k_f + j];
              }
            }
          y[((n * g.out_maps + o) * g.out_t + t) * g.out_f + f] = acc;
        }
}

/// Accumulates into whichever of dx, dw, db are non-empty.
template <typename T>
void conv_direct_backward(const ConvGeom &g, std::span<const T> x, std::span<const T> w,
                          std::span<const T> dy, std::span<T> dx, std::span<T> dw,
                          std::span<T> db) {
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t o = 0; o < g.out_maps; ++o)
      for (std::size_t t = 0; t < g.out_t; ++t)
        for (std::size_t f = 0; f < g.out_f; ++f) {
          const T go = dy[((n * g.out_maps + o) * g.out_t + t) * g.out_f + f];
          if (!db.empty()) db[o] += go;
          for (std::size_t c = 0; c < g.in_maps; ++c)
            for (std::size_t i = 0; i < g.k_t; ++i) {
              const std::ptrdiff_t st = std::ptrdiff_t(t + i) - std::ptrdiff_t(g.pad_t);
              if (st < 0 || st >= std::ptrdiff_t(g.in_t)) continue;
              for (std::size_t j = 0; j < g.k_f; ++j) {
                const std::ptrdiff_t sf = std::ptrdiff_t(f + j) - std::ptrdiff_t(g.pad_f);
                if (sf < 0 || sf >= std::ptrdiff_t(g.in_f)) continue;
                const std::size_t xi = ((n * g.in_maps + c) * g.in_t + st) * g.in_f + sf;
                const std::size_t wi = ((o * g.in_maps + c) * g.k_t + i) * g.k_f + j;
                if (!dx.empty()) dx[xi] += go * w[wi];
                if (!dw.empty()) dw[wi] += go * x[xi];
              }
            }
        }
}

/// Output columns [lo, hi) whose tap j lands inside the input row.
inline std::pair<std::size_t, std::size_t> valid_span(std::size_t j, std::size_t pad,
                                                      std::size_t in, std::size_t out) {
  const std::size_t lo = pad > j ? pad - j : 0;
  const std::size_t hi = std::min(out, in + pad - j);
  return {std::min(lo, hi), hi};
}

/// Unfolds one sample into a (in_maps*kH*kW) x (out_t*out_f) patch matrix.
template <typename T>
void im2col(const ConvGeom &g, const T *x, T *col) {
  const std::size_t P = g.out_pixels();
  for (std::size_t c = 0; c < g.in_maps; ++c)
    for (std::size_t i = 0; i < g.k_t; ++i)
      for (std::size_t j = 0; j < g.k_f; ++j) {
        T *row = col + ((c * g.k_t + i) * g.k_f + j) * P;
        const auto [lo, hi] = valid_span(j, g.pad_f, g.in_f, g.out_f);
        for (std::size_t t = 0; t < g.out_t; ++t) {
          T *dst = row + t * g.out_f;
          const std::ptrdiff_t st = std::ptrdiff_t(t + i) - std::ptrdiff_t(g.pad_t);
          if (st < 0 || st >= std::ptrdiff_t(g.in_t)) {
            std::fill(dst, dst + g.out_f, T(0));
            continue;
          }
          const T *src = x + (c * g.in_t + st) * g.in_f + (lo + j - g.pad_f);
          std::fill(dst, dst + lo, T(0));
          std::copy(src, src + (hi - lo), dst + lo);
          std::fill(dst + hi, dst + g.out_f, T(0));
        }
      }
}

/// Folds a patch-matrix gradient back onto one sample, accumulating.
template <typename T>
void col2im(const ConvGeom &g, const T *col, T *dx) {
  const std::size_t P = g.out_pixels();
  for (std::size_t c = 0; c < g.in_maps; ++c)
    for (std::size_t i = 0; i < g.k_t; ++i)
      for (std::size_t j = 0; j < g.k_f; ++j) {
        const T *row = col + ((c * g.k_t + i) * g.k_f + j) * P;
        const auto [lo, hi] = valid_span(j, g.pad_f, g.in_f, g.out_f);
        for (std::size_t t = 0; t < g.out_t; ++t) {
          const std::ptrdiff_t st = std::ptrdiff_t(t + i) - std::ptrdiff_t(g.pad_t);
          if (st < 0 || st >= std::ptrdiff_t(g.in_t)) continue;
          T *dst = dx + (c * g.in_t + st) * g.in_f + (lo + j - g.pad_f);
          const T *src = row + t * g.out_f + lo;
          for (std::size_t f = 0; f < hi - lo; ++f) dst[f] += src[f];
        }
      }
}

/// im2col + GEMM forward. Fills cols (batch * patch * pixels) for reuse in
/// the backward pass.
template <typename T>
void conv_im2col_forward(const ConvGeom &g, std::span<const T> x, std::span<const T> w,
                         std::span<const T> b, std::span<T> y, std::vector<T> &cols) {
  const std::size_t K = g.patch(), P = g.out_pixels();
  cols.resize(g.batch * K * P);
  const ConstMatMap<T> W(w.data(), g.out_maps, K);
  parallel_for(g.batch, [&](std::size_t n) {
    T *col = cols.data() + n * K * P;
    im2col(g, x.data() + n * g.in_maps * g.in_t * g.in_f, col);
    MatMap<T> Y(y.data() + n * g.out_maps * P, g.out_maps, P);
    Y.noalias() = W * ConstMatMap<T>(col, K, P);
    for (std::size_t o = 0; o < g.out_maps; ++o) {
      T *row = y.data() + (n * g.out_maps + o) * P;
      for (std::size_t p = 0; p < P; ++p) row[p] += b[o];
    }
  });
}

template <typename T>
void conv_im2col_backward(const ConvGeom &g, std::span<const T> w,
                          const std::vector<T> &cols, std::span<const T> dy,
                          std::span<T> dx, std::span<T> dw, std::span<T> db) {
  const std::size_t K = g.patch(), P = g.out_pixels();
  const std::size_t in_size = g.in_maps * g.in_t * g.in_f;
  if (!db.empty())
    for (std::size_t n = 0; n < g.batch; ++n)
      for (std::size_t o = 0; o < g.out_maps; ++o) {
        const T *row = dy.data() + (n * g.out_maps + o) * P;
        T acc = T(0);
        for (std::size_t p = 0; p < P; ++p) acc += row[p];
        db[o] += acc;
      }
  if (!dw.empty()) {
    MatMap<T> dW(dw.data(), g.out_maps, K);
    for (std::size_t n = 0; n < g.batch; ++n) {
      const ConstMatMap<T> dY(dy.data() + n * g.out_maps * P, g.out_maps, P);
      const ConstMatMap<T> C(cols.data() + n * K * P, K, P);
      dW.noalias() += dY * C.transpose();
    }
  }
  if (!dx.empty()) {
    const ConstMatMap<T> W(w.data(), g.out_maps, K);
    parallel_for(g.batch, [&](std::size_t n) {
      RowMat<T> dcol(K, P);
      dcol.noalias() =
          W.transpose() * ConstMatMap<T>(dy.data() + n * g.out_maps * P, g.out_maps, P);
      col2im(g, dcol.data(), dx.data() + n * in_size);
    });
  }
}

struct PoolGeom {
  std::size_t batch, maps, in_t, in_f, pool_t, pool_f, out_t, out_f;
};

inline PoolGeom pool_geometry(const Shape &input, std::size_t pool_t, std::size_t pool_f) {
  if (input.size() != 4)
    throw DimensionError("maxpool2d input must be N x C x T x F, got " +
                         shape_string(input));
  if (pool_t == 0 || pool_f == 0) throw ContractError("pool sizes must be positive");
  if (input[2] < pool_t)
    throw GeometryError("maxpool2d time axis: pool " + std::to_string(pool_t) +
                        " exceeds extent " + std::to_string(input[2]));
  if (input[3] < pool_f)
    throw GeometryError("maxpool2d frequency axis: pool " + std::to_string(pool_f) +
                        " exceeds extent " + std::to_string(input[3]));
  return {input[0], input[1], input[2],          input[3],
          pool_t,   pool_f,   input[2] / pool_t, input[3] / pool_f};
}

/// Non-overlapping max pooling; argmax holds the flat input index chosen for
/// each output (first maximum in scan order).
template <typename T>
void maxpool_forward(const PoolGeom &g, std::span<const T> x, std::span<T> y,
                     std::span<std::size_t> argmax) {
  for (std::size_t nc = 0; nc < g.batch * g.maps; ++nc) {
    const std::size_t in_base = nc * g.in_t * g.in_f;
    for (std::size_t ot = 0; ot < g.out_t; ++ot)
      for (std::size_t of = 0; of < g.out_f; ++of) {
        std::size_t best = in_base + (ot * g.pool_t) * g.in_f + of * g.pool_f;
        for (std::size_t i = 0; i < g.pool_t; ++i)
          for (std::size_t j = 0; j < g.pool_f; ++j) {
            const std::size_t idx = in_base + (ot * g.pool_t + i) * g.in_f + of * g.pool_f + j;
            if (x[idx] > x[best]) best = idx;
          }
        const std::size_t out = (nc * g.out_t + ot) * g.out_f + of;
        y[out] = x[best];
        argmax[out] = best;
      }
  }
}

/// Numerically stable softmax of each row; returns summed -log p[target].
template <typename T>
double softmax_rows(std::size_t rows, std::size_t classes, std::span<const T> logits,
                    std::span<const std::uint32_t> targets, std::span<T> probs) {
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const T *z = logits.data() + r * classes;
    T *p = probs.data() + r * classes;
    std::size_t jmax = 0;
    for (std::size_t j = 1; j < classes; ++j)
      if (z[j] > z[jmax]) jmax = j;
    const T zmax = z[jmax];
    T rest = T(0);
    for (std::size_t j = 0; j < classes; ++j) {
      p[j] = std::exp(z[j] - zmax);
      if (j != jmax) rest += p[j];
    }
    const T denom = T(1) + rest;
    for (std::size_t j = 0; j < classes; ++j) p[j] /= denom;
    if (!targets.empty()) {
      // (zmax - z_t) is exactly zero when the target is the argmax, so tiny
      // losses keep full relative precision.
      total += double(zmax - z[targets[r]]) + double(std::log1p(rest));
    }
  }
  return total;
}

} // namespace convlab::kernels
