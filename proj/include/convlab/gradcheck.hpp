#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "convlab/autodiff.hpp"

namespace convlab {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

template <typename T> using ScalarFn = std::function<Var<T>(const Var<T> &)>;

/// Compares reverse-mode gradients of a scalar function against central
/// differences with step h. Per-element error is
/// |ga - gn| / max(1e-12, |ga| + |gn|).
template <typename T = double>
GradCheckReport finite_diff_report(const ScalarFn<T> &f, const Tensor<T> &x, T h = T(1e-5)) {
  GradCheckReport r;
  Var<T> xv = Var<T>::leaf(x, true);
  backward(f(xv));
  const auto g = xv.value().has_grad() ? std::vector<T>(xv.grad().begin(), xv.grad().end())
                                       : std::vector<T>(x.numel(), T(0));

  NoGradGuard no_grad;
  Tensor<T> probe = x;
  r.analytic.resize(x.numel());
  r.numeric.resize(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T orig = probe[i];
    probe[i] = orig + h;
    const double up = double(f(Var<T>::leaf(probe)).value()[0]);
    probe[i] = orig - h;
    const double down = double(f(Var<T>::leaf(probe)).value()[0]);
    probe[i] = orig;
    const double gn = (up - down) / (2.0 * double(h));
    const double ga = double(g[i]);
    r.analytic[i] = ga;
    r.numeric[i] = gn;
    const double err = std::abs(ga - gn) / std::max(1e-12, std::abs(ga) + std::abs(gn));
    if (err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst_index = i;
    }
  }
  return r;
}

template <typename T = double>
double finite_diff_check(const ScalarFn<T> &f, const Tensor<T> &x, T h = T(1e-5)) {
  return finite_diff_report<T>(f, x, h).max_rel_error;
}

} // namespace convlab
