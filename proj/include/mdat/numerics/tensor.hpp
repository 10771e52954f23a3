#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mdat::numerics {

using Shape = std::vector<std::size_t>;

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

/// Dense row-major tensor of rank 1 or 2.
///
/// A rank-1 tensor of length n behaves as a 1 x n row wherever a matrix is
/// expected; biases and gains are stored that way.
template <class Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape();
    data_.assign(shape_numel(shape_), Real(0));
  }

  Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }

  static Tensor filled(Shape shape, Real v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = Real(1);
    return t;
  }

  /// Builds a matrix from nested row lists; all rows must have equal length.
  static Tensor from_rows(std::initializer_list<std::initializer_list<Real>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<Real> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ShapeError("ragged row list");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
  }

  static Tensor vector(std::initializer_list<Real> values) {
    return Tensor({values.size()}, std::vector<Real>(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  std::span<const Real> data() const { return data_; }
  std::span<Real> data() { return data_; }
  const std::vector<Real>& values() const { return data_; }

  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }

  Real& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const Real& at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<const Real> row(std::size_t r) const {
    return std::span<const Real>(data_).subspan(r * cols(), cols());
  }
  std::span<Real> row(std::size_t r) { return std::span<Real>(data_).subspan(r * cols(), cols()); }

  bool all_finite() const {
    for (auto v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <class Other>
  Tensor<Other> cast() const {
    std::vector<Other> out(data_.begin(), data_.end());
    return Tensor<Other>(shape_, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void validate_shape() const {
    if (shape_.empty() || shape_.size() > 2) {
      throw ShapeError("tensor rank must be 1 or 2, got shape " + shape_str(shape_));
    }
    for (auto d : shape_) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape_));
    }
  }

  Shape shape_;
  std::vector<Real> data_;
};

/// Largest absolute elementwise difference; shapes must match.
template <class Real>
double max_abs_diff(const Tensor<Real>& a, const Tensor<Real>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return m;
}

}  // namespace mdat::numerics
