#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "relkit/error.hpp"

namespace relkit {

// Dense row-major tensor of doubles, rank 0 (scalar), 1 or 2. That covers
// every matrix in the model; per-relation stacks are vectors of rank-2
// tensors.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    for (int d : shape_) {
      if (d <= 0) throw ShapeError("tensor dimension must be positive");
    }
    data_.assign(static_cast<std::size_t>(count(shape_)), 0.0);
  }

  static Tensor scalar(double v) {
    Tensor t{std::vector<int>{}};
    t.data_[0] = v;
    return t;
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }

  static Tensor from_vector(std::vector<double> values) {
    Tensor t;
    t.shape_ = {static_cast<int>(values.size())};
    t.data_ = std::move(values);
    if (t.data_.empty()) throw ShapeError("tensor dimension must be positive");
    return t;
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Tensor t({r, c});
    int i = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c)
        throw ShapeError("from_rows: ragged row lengths");
      for (double v : row) t.data_[static_cast<std::size_t>(i++)] = v;
    }
    return t;
  }

  bool defined() const { return !data_.empty(); }
  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  int rows() const { return shape_.at(0); }
  int cols() const { return shape_.at(1); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double value() const {
    if (size() != 1) throw ShapeError("value(): tensor is not a scalar, shape " + shape_str());
    return data_[0];
  }

  double& at(int i) { return data_[static_cast<std::size_t>(i)]; }
  double at(int i) const { return data_[static_cast<std::size_t>(i)]; }

  double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * cols() + j]; }
  double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols() + j]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  std::string shape_str() const {
    if (shape_.empty()) return defined() ? "scalar" : "undefined";
    std::ostringstream os;
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) os << "x";
      os << shape_[i];
    }
    return os.str();
  }

  Tensor& operator+=(const Tensor& o) {
    if (!same_shape(o)) {
      throw ShapeError("accumulate: shape " + shape_str() + " vs " + o.shape_str());
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Tensor& operator*=(double c) {
    for (double& v : data_) v *= c;
    return *this;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  static std::int64_t count(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  std::vector<int> shape_;
  std::vector<double> data_;
};

namespace kernel {

inline void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + t.shape_str());
  }
}

// C = A * B for (m x k) . (k x n); ikj order keeps the inner loops contiguous.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor c({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < k; ++t) {
      const double av = pa[static_cast<std::size_t>(i) * k + t];
      const double* brow = pb + static_cast<std::size_t>(t) * n;
      double* crow = pc + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

inline Tensor transpose(const Tensor& a) {
  require_matrix("transpose", a);
  Tensor t({a.cols(), a.rows()});
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

// Numerically stable logistic; result clamped to the open interval (0,1) so
// the probability-matrix invariant holds even for saturating inputs.
inline double sigmoid(double x) {
  double y;
  if (x >= 0.0) {
    y = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    y = e / (1.0 + e);
  }
  const double lo = std::numeric_limits<double>::min();
  const double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  return std::clamp(y, lo, hi);
}

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

template <class F>
inline Tensor map(const Tensor& a, F f) {
  Tensor out = a;
  double* p = out.data();
  for (std::int64_t i = 0; i < out.size(); ++i) p[i] = f(p[i]);
  return out;
}

}  // namespace kernel
}  // namespace relkit
