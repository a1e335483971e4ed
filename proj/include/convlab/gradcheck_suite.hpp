#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "convlab/gradcheck.hpp"
#include "convlab/ops.hpp"
#include "convlab/rng.hpp"

namespace convlab {

struct SuiteResult {
  std::string primitive;
  std::size_t configs = 0;
  double max_rel_error = 0.0;
  std::string worst{}; ///< description of the worst configuration
};

namespace detail {

inline Tensor<double> random_tensor(Rng &rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (auto &v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

inline std::size_t pick(Rng &rng, std::size_t lo, std::size_t hi) {
  return lo + std::size_t(rng.below(hi - lo + 1));
}

/// Largest error over gradients with respect to each argument in turn,
/// holding the others fixed.
inline double check_each(const std::vector<Tensor<double>> &args,
                         const std::function<Var<double>(const std::vector<Var<double>> &)> &f,
                         double h) {
  double worst = 0.0;
  for (std::size_t k = 0; k < args.size(); ++k) {
    ScalarFn<double> g = [&](const Var<double> &xk) {
      std::vector<Var<double>> vs;
      for (std::size_t j = 0; j < args.size(); ++j)
        vs.push_back(j == k ? xk : Var<double>::leaf(args[j]));
      return f(vs);
    };
    worst = std::max(worst, finite_diff_check<double>(g, args[k], h));
  }
  return worst;
}

} // namespace detail

/// Finite-difference checks of the five layer primitives over `configs`
/// random shapes each, in double precision. Scalar objectives project each
/// op output onto fixed random weights; ReLU inputs and max-pool windows are
/// kept away from kinks and ties.
inline std::vector<SuiteResult> run_gradient_suite(std::size_t configs, std::uint64_t seed,
                                                   double h = 1e-5) {
  using detail::pick;
  using detail::random_tensor;
  std::vector<SuiteResult> out;
  auto record = [&](SuiteResult &r, double err, const std::string &desc) {
    ++r.configs;
    if (err >= r.max_rel_error) {
      r.max_rel_error = err;
      r.worst = desc;
    }
  };

  {
    SuiteResult r{"conv2d", 0, 0.0, {}};
    for (std::size_t i = 0; i < configs; ++i) {
      Rng rng(derive_seed(seed, "conv2d", i));
      const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 3), o = pick(rng, 1, 3);
      const std::size_t kt = pick(rng, 1, 3), kf = pick(rng, 1, 3);
      const std::size_t pt = pick(rng, 0, 1), pf = pick(rng, 0, 1);
      const std::size_t t = pick(rng, kt, kt + 3), f = pick(rng, kf, kf + 3);
      const auto x = random_tensor(rng, {n, c, t, f});
      const auto w = random_tensor(rng, {o, c, kt, kf});
      const auto b = random_tensor(rng, {o});
      const Shape ys{n, o, t + 2 * pt - kt + 1, f + 2 * pf - kf + 1};
      const auto proj = random_tensor(rng, ys);
      const double err = detail::check_each({x, w, b}, [&](const std::vector<Var<double>> &v) {
        return weighted_sum(conv2d<double>(v[0], {v[1], v[2], pt, pf}), proj);
      }, h);
      record(r, err, shape_string(x.shape()) + " * " + shape_string(w.shape()) + " pad " +
                         std::to_string(pt) + "x" + std::to_string(pf));
    }
    out.push_back(r);
  }
  {
    SuiteResult r{"maxpool2d", 0, 0.0, {}};
    for (std::size_t i = 0; i < configs; ++i) {
      Rng rng(derive_seed(seed, "maxpool2d", i));
      const std::size_t n = pick(rng, 1, 2), c = pick(rng, 1, 2);
      const std::size_t pt = pick(rng, 1, 3), pf = pick(rng, 1, 3);
      const std::size_t t = pick(rng, pt, 2 * pt + 1), f = pick(rng, pf, 2 * pf + 1);
      Tensor<double> x(Shape{n, c, t, f});
      // Distinct values at least 0.01 apart: far from ties relative to h.
      std::vector<std::size_t> order(x.numel());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
      for (std::size_t k = 0; k < order.size(); ++k)
        x[order[k]] = 0.01 * double(k) + 0.001 * rng.uniform();
      const auto proj = random_tensor(rng, {n, c, t / pt, f / pf});
      const double err = detail::check_each({x}, [&](const std::vector<Var<double>> &v) {
        return weighted_sum(maxpool2d<double>(v[0], {pt, pf}), proj);
      }, h);
      record(r, err, shape_string(x.shape()) + " pool " + std::to_string(pt) + "x" + std::to_string(pf));
    }
    out.push_back(r);
  }
  {
    SuiteResult r{"relu", 0, 0.0, {}};
    for (std::size_t i = 0; i < configs; ++i) {
      Rng rng(derive_seed(seed, "relu", i));
      const Shape s{pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 5)};
      auto x = random_tensor(rng, s);
      for (auto &v : x.data())
        if (std::abs(v) < 1e-2) v = v < 0 ? -1e-2 : 1e-2;
      const auto proj = random_tensor(rng, s);
      const double err = detail::check_each({x}, [&](const std::vector<Var<double>> &v) {
        return weighted_sum(relu<double>(v[0]), proj);
      }, h);
      record(r, err, shape_string(s));
    }
    out.push_back(r);
  }
  {
    SuiteResult r{"affine", 0, 0.0, {}};
    for (std::size_t i = 0; i < configs; ++i) {
      Rng rng(derive_seed(seed, "affine", i));
      const std::size_t n = pick(rng, 1, 3), d = pick(rng, 1, 6), hw = pick(rng, 1, 6);
      const auto x = random_tensor(rng, {n, d});
      const auto w = random_tensor(rng, {d, hw});
      const auto b = random_tensor(rng, {hw});
      const auto proj = random_tensor(rng, {n, hw});
      const double err = detail::check_each({x, w, b}, [&](const std::vector<Var<double>> &v) {
        return weighted_sum(affine<double>(v[0], v[1], v[2]), proj);
      }, h);
      record(r, err, std::to_string(n) + "x" + std::to_string(d) + " * " + std::to_string(d) +
                         "x" + std::to_string(hw));
    }
    out.push_back(r);
  }
  {
    SuiteResult r{"softmax_xent", 0, 0.0, {}};
    for (std::size_t i = 0; i < configs; ++i) {
      Rng rng(derive_seed(seed, "softmax_xent", i));
      const std::size_t n = pick(rng, 1, 4), k = pick(rng, 2, 6);
      const auto z = random_tensor(rng, {n, k}, -3.0, 3.0);
      std::vector<std::uint32_t> targets(n);
      for (auto &t : targets) t = std::uint32_t(rng.below(k));
      const double err = detail::check_each({z}, [&](const std::vector<Var<double>> &v) {
        return softmax_xent<double>(v[0], targets).loss;
      }, h);
      record(r, err, std::to_string(n) + "x" + std::to_string(k));
    }
    out.push_back(r);
  }
  return out;
}

} // namespace convlab
