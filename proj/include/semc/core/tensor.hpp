// Copyright 2026 SEMC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "semc/core/error.hpp"
#include "semc/core/rng.hpp"

namespace semc {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index numel_of(const Shape& s) {
  Index n = 1;
  for (Index d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

/// Dense n-d array in row-major (NCHW for feature maps) layout, backed by an
/// Eigen array. Rank is dynamic; most ops in this project use rank 1, 2 or 4.
template <typename Scalar>
class Tensor {
public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap =
      Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() = default;

  explicit Tensor(Shape shape)
      : shape_(std::move(shape)), data_(Storage::Zero(numel_of(shape_))) {}

  Tensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != numel_of(shape_)) {
      throw ShapeError("tensor storage size " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, Scalar v) {
    Tensor t(std::move(shape));
    t.data_.setConstant(v);
    return t;
  }

  static Tensor ones(Shape shape) { return full(std::move(shape), Scalar(1)); }

  static Tensor scalar(Scalar v) { return full({1}, v); }

  static Tensor from(Shape shape, std::initializer_list<Scalar> vals) {
    Tensor t(std::move(shape));
    if (Index(vals.size()) != t.numel()) {
      throw ShapeError("initializer size does not match shape");
    }
    std::copy(vals.begin(), vals.end(), t.data());
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return Index(shape_.size()); }
  Index dim(Index i) const { return shape_[std::size_t(i)]; }
  Index numel() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Storage& array() { return data_; }
  const Storage& array() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar& at(Index i, Index j) { return data_[i * dim(1) + j]; }
  Scalar at(Index i, Index j) const { return data_[i * dim(1) + j]; }

  Scalar& at(Index b, Index c, Index h, Index w) {
    return data_[((b * dim(1) + c) * dim(2) + h) * dim(3) + w];
  }
  Scalar at(Index b, Index c, Index h, Index w) const {
    return data_[((b * dim(1) + c) * dim(2) + h) * dim(3) + w];
  }

  /// Rank-2 Eigen matrix view (requires rank() == 2).
  MatrixMap mat() {
    require_rank(2);
    return MatrixMap(data(), dim(0), dim(1));
  }
  ConstMatrixMap mat() const {
    require_rank(2);
    return ConstMatrixMap(data(), dim(0), dim(1));
  }

  /// Reinterprets the flat storage as a rows x cols matrix.
  MatrixMap mat_view(Index rows, Index cols) {
    if (rows * cols != numel()) throw ShapeError("mat_view size mismatch");
    return MatrixMap(data(), rows, cols);
  }
  ConstMatrixMap mat_view(Index rows, Index cols) const {
    if (rows * cols != numel()) throw ShapeError("mat_view size mismatch");
    return ConstMatrixMap(data(), rows, cols);
  }

  Tensor reshaped(Shape shape) const {
    if (numel_of(shape) != numel()) {
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  void fill(Scalar v) { data_.setConstant(v); }
  void set_zero() { data_.setZero(); }

  void set_normal(Rng& rng, Scalar mean, Scalar stddev) {
    for (Index i = 0; i < data_.size(); ++i) {
      data_[i] = Scalar(rng.normal(double(mean), double(stddev)));
    }
  }

  void set_uniform(Rng& rng, Scalar lo, Scalar hi) {
    for (Index i = 0; i < data_.size(); ++i) {
      data_[i] = Scalar(rng.uniform(double(lo), double(hi)));
    }
  }

  bool all_finite() const { return data_.isFinite().all(); }

  Scalar max_abs_diff(const Tensor& other) const {
    if (other.numel() != numel()) throw ShapeError("max_abs_diff shape mismatch");
    if (numel() == 0) return Scalar(0);
    return (data_ - other.data_).abs().maxCoeff();
  }

  template <typename Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(shape_);
    for (Index i = 0; i < numel(); ++i) out[i] = Other(data_[i]);
    return out;
  }

private:
  void require_rank(Index r) const {
    if (rank() != r) {
      throw ShapeError("expected rank " + std::to_string(r) + " tensor, got " +
                       shape_str(shape_));
    }
  }

  Shape shape_;
  Storage data_;
};

template <typename Scalar>
bool same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return a.shape() == b.shape();
}

}  // namespace semc
