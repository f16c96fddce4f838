#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace anycast {

using Vector = std::vector<double>;

/// Dense row-major matrix. Problem sizes stay in the hundreds, so no sparse
/// storage is offered.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw std::invalid_argument("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// y = M x
inline Vector multiply(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) throw std::invalid_argument("multiply: dimension mismatch");
  Vector y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto r = m.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) acc += r[j] * x[j];
    y[i] = acc;
  }
  return y;
}

inline double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, e < 0 ? -e : e);
  return m;
}

inline double squared_norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return s;
}

}  // namespace anycast
