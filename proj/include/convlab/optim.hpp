#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convlab/autodiff.hpp"
#include "convlab/errors.hpp"

namespace convlab {

enum class OptimizerMode { sgd, momentum, adadelta, adam };

inline const char *mode_name(OptimizerMode m) {
  switch (m) {
  case OptimizerMode::sgd: return "sgd";
  case OptimizerMode::momentum: return "momentum";
  case OptimizerMode::adadelta: return "adadelta";
  case OptimizerMode::adam: return "adam";
  }
  return "?";
}

inline OptimizerMode parse_mode(std::string_view s) {
  if (s == "sgd") return OptimizerMode::sgd;
  if (s == "momentum") return OptimizerMode::momentum;
  if (s == "adadelta") return OptimizerMode::adadelta;
  if (s == "adam") return OptimizerMode::adam;
  throw ContractError("unknown optimizer '" + std::string(s) + "'");
}

namespace detail {
template <typename T>
void check_same(std::span<const T> a, std::span<const T> b, const char *what) {
  if (a.size() != b.size())
    throw DimensionError(std::string(what) + ": " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + " elements");
}
} // namespace detail

/// w <- w - lr * g
template <typename T> void sgd_step(std::span<T> w, std::span<const T> g, T lr) {
  detail::check_same<T>(w, g, "sgd_step params/grads");
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
}

/// v <- mu v + g; w <- w - lr v
template <typename T>
void momentum_step(std::span<T> w, std::span<const T> g, T lr, T mu, std::span<T> v) {
  detail::check_same<T>(w, g, "momentum_step params/grads");
  detail::check_same<T>(w, v, "momentum_step params/velocity");
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = mu * v[i] + g[i];
    w[i] -= lr * v[i];
  }
}

/// Adadelta with running averages of squared gradients and squared updates;
/// no global learning rate.
template <typename T>
void adadelta_step(std::span<T> w, std::span<const T> g, T rho, T eps, std::span<T> eg2,
                   std::span<T> edx2) {
  if (!(rho > T(0) && rho < T(1))) throw ContractError("adadelta rho must lie in (0, 1)");
  if (!(eps > T(0))) throw ContractError("adadelta eps must be positive");
  detail::check_same<T>(w, g, "adadelta_step params/grads");
  detail::check_same<T>(w, eg2, "adadelta_step params/E[g^2]");
  detail::check_same<T>(w, edx2, "adadelta_step params/E[dx^2]");
  for (std::size_t i = 0; i < w.size(); ++i) {
    eg2[i] = rho * eg2[i] + (T(1) - rho) * g[i] * g[i];
    const T dx = -std::sqrt((edx2[i] + eps) / (eg2[i] + eps)) * g[i];
    edx2[i] = rho * edx2[i] + (T(1) - rho) * dx * dx;
    w[i] += dx;
  }
}

/// Adam with bias correction; `step` is the 1-based count including this one.
template <typename T>
void adam_step(std::span<T> w, std::span<const T> g, T alpha, T beta1, T beta2, T eps,
               std::span<T> m, std::span<T> v, std::uint64_t step) {
  if (!(alpha > T(0))) throw ContractError("adam alpha must be positive");
  if (!(beta1 >= T(0) && beta1 < T(1)) || !(beta2 >= T(0) && beta2 < T(1)))
    throw ContractError("adam betas must lie in [0, 1)");
  if (!(eps > T(0))) throw ContractError("adam eps must be positive");
  if (step == 0) throw ContractError("adam step count starts at 1");
  detail::check_same<T>(w, g, "adam_step params/grads");
  detail::check_same<T>(w, m, "adam_step params/m");
  detail::check_same<T>(w, v, "adam_step params/v");
  const T c1 = T(1) - T(std::pow(double(beta1), double(step)));
  const T c2 = T(1) - T(std::pow(double(beta2), double(step)));
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] / c1;
    const T vhat = v[i] / c2;
    w[i] -= alpha * mhat / (std::sqrt(vhat) + eps);
  }
}

struct OptimizerConfig {
  OptimizerMode mode = OptimizerMode::adadelta;
  double lr = 1e-3; ///< sgd / momentum, and the finetuning phase
  double mu = 0.9;
  double rho = 0.985;
  std::optional<double> eps; ///< adadelta default 1e-10, adam default 1e-8
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  /// Switch to plain SGD with `lr` once this many epochs have completed
  /// (negative: never).
  int finetune_after_epoch = -1;

  double effective_eps() const {
    if (eps) return *eps;
    return mode == OptimizerMode::adam ? 1e-8 : 1e-10;
  }
};

/// Per-parameter state for one of the four update rules over a fixed list of
/// named parameters. Parameters without a gradient slot count as zero
/// gradient.
template <typename T> class Optimizer {
public:
  using Named = std::pair<std::string, Var<T>>;

  Optimizer(OptimizerConfig cfg, std::vector<Named> params)
      : cfg_(cfg), params_(std::move(params)) {
    reset_state();
  }

  const OptimizerConfig &config() const { return cfg_; }
  OptimizerMode mode() const { return cfg_.mode; }
  std::uint64_t steps() const { return steps_; }
  const std::vector<Named> &params() const { return params_; }

  void zero_grad() {
    for (auto &[name, p] : params_) p.zero_grad();
  }

  void step() {
    ++steps_;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto &p = params_[i].second;
      std::span<T> w = p.value().data();
      const std::span<const T> g =
          p.value().has_grad() ? std::span<const T>(p.value().grad())
                               : std::span<const T>(zeros(w.size()).data(), w.size());
      auto &s = state_[i];
      switch (cfg_.mode) {
      case OptimizerMode::sgd: sgd_step<T>(w, g, T(cfg_.lr)); break;
      case OptimizerMode::momentum: momentum_step<T>(w, g, T(cfg_.lr), T(cfg_.mu), s[0]); break;
      case OptimizerMode::adadelta:
        adadelta_step<T>(w, g, T(cfg_.rho), T(cfg_.effective_eps()), s[0], s[1]);
        break;
      case OptimizerMode::adam:
        adam_step<T>(w, g, T(cfg_.alpha), T(cfg_.beta1), T(cfg_.beta2), T(cfg_.effective_eps()),
                     s[0], s[1], steps_);
        break;
      }
    }
  }

  /// Starts the SGD finetuning phase; accumulators of the previous rule are
  /// discarded and the step counter restarts.
  void switch_to_sgd() {
    cfg_.mode = OptimizerMode::sgd;
    steps_ = 0;
    reset_state();
  }

  static std::vector<const char *> slot_names(OptimizerMode mode) {
    switch (mode) {
    case OptimizerMode::sgd: return {};
    case OptimizerMode::momentum: return {"velocity"};
    case OptimizerMode::adadelta: return {"eg2", "edx2"};
    case OptimizerMode::adam: return {"m", "v"};
    }
    return {};
  }

  /// Accumulators as (name, values) pairs, e.g. "fc1.weight/eg2".
  std::vector<std::pair<std::string, std::vector<T>>> export_state() const {
    std::vector<std::pair<std::string, std::vector<T>>> out;
    const auto slots = slot_names(cfg_.mode);
    for (std::size_t i = 0; i < params_.size(); ++i)
      for (std::size_t s = 0; s < slots.size(); ++s)
        out.emplace_back(params_[i].first + "/" + slots[s], state_[i][s]);
    return out;
  }

  void import_state(OptimizerMode mode, std::uint64_t steps,
                    const std::map<std::string, std::vector<T>> &blobs) {
    cfg_.mode = mode;
    steps_ = steps;
    reset_state();
    const auto slots = slot_names(cfg_.mode);
    for (std::size_t i = 0; i < params_.size(); ++i)
      for (std::size_t s = 0; s < slots.size(); ++s) {
        const std::string name = params_[i].first + "/" + slots[s];
        auto it = blobs.find(name);
        if (it == blobs.end()) throw IncompatibilityError(name, "optimizer state missing");
        if (it->second.size() != state_[i][s].size())
          throw IncompatibilityError(name, "optimizer state has the wrong size");
        state_[i][s] = it->second;
      }
  }

  /// Slot s of parameter i (for tests and diagnostics).
  std::span<const T> slot(std::size_t i, std::size_t s) const { return state_.at(i).at(s); }

private:
  void reset_state() {
    const std::size_t n = slot_names(cfg_.mode).size();
    state_.assign(params_.size(), {});
    for (std::size_t i = 0; i < params_.size(); ++i)
      state_[i].assign(n, std::vector<T>(params_[i].second.value().numel(), T(0)));
  }

  const std::vector<T> &zeros(std::size_t n) {
    if (zero_.size() < n) zero_.assign(n, T(0));
    return zero_;
  }

  OptimizerConfig cfg_;
  std::vector<Named> params_;
  std::vector<std::vector<std::vector<T>>> state_;
  std::vector<T> zero_;
  std::uint64_t steps_ = 0;
};

} // namespace convlab
