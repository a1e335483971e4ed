#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "convlab/errors.hpp"

namespace convlab {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape &shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s.empty() ? std::string("scalar") : s;
}

/// Dense row-major array with an optional gradient slot of the same shape.
template <typename T> class Tensor {
public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (shape_numel(shape_) != data_.size())
      throw DimensionError("tensor of shape " + shape_string(shape_) + " needs " +
                           std::to_string(shape_numel(shape_)) + " values, got " +
                           std::to_string(data_.size()));
  }

  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  const Shape &shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const noexcept { return data_.size(); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T> &values() noexcept { return data_; }
  const std::vector<T> &values() const noexcept { return data_; }

  T &operator[](std::size_t i) { return data_[i]; }
  const T &operator[](std::size_t i) const { return data_[i]; }

  T &at(std::initializer_list<std::size_t> idx) { return data_[offset(idx)]; }
  const T &at(std::initializer_list<std::size_t> idx) const { return data_[offset(idx)]; }

  bool has_grad() const noexcept { return grad_.has_value(); }

  /// Allocates a zero gradient if absent.
  std::span<T> ensure_grad() {
    if (!grad_) grad_.emplace(data_.size(), T(0));
    return *grad_;
  }
  std::span<T> grad() {
    if (!grad_) throw ContractError("tensor has no gradient slot");
    return *grad_;
  }
  std::span<const T> grad() const {
    if (!grad_) throw ContractError("tensor has no gradient slot");
    return *grad_;
  }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), T(0));
  }
  void drop_grad() { grad_.reset(); }

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != numel())
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " +
                           shape_string(shape));
    return Tensor(std::move(shape), data_);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor &a, const Tensor &b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

private:
  static void check_shape(const Shape &shape) {
    for (std::size_t i = 0; i < shape.size(); ++i)
      if (shape[i] == 0)
        throw DimensionError("axis " + std::to_string(i) + " has zero extent");
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.size())
      throw IndexError("index rank " + std::to_string(idx.size()) +
                       " does not match tensor rank " + std::to_string(shape_.size()));
    std::size_t off = 0, axis = 0;
    for (std::size_t i : idx) {
      if (i >= shape_[axis])
        throw IndexError("index " + std::to_string(i) + " out of range on axis " +
                         std::to_string(axis));
      off = off * shape_[axis] + i;
      ++axis;
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
  std::optional<std::vector<T>> grad_;
};

} // namespace convlab
