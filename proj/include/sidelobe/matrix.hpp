#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace sidelobe {

/// Dense row-major matrix of doubles. Widths in this project are tiny, so
/// this stays a thin value type rather than pulling in a linear algebra
/// package.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != rows_ * cols_) {
      throw std::invalid_argument("Matrix: value count does not match shape");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& values() noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool is_diagonal() const noexcept {
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c)
        if (r != c && data_[r * cols_ + c] != 0.0) return false;
    return true;
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// y = M x
inline std::vector<double> multiply(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) throw std::invalid_argument("multiply: dimension mismatch");
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) acc += m(r, c) * x[c];
    y[r] = acc;
  }
  return y;
}

}  // namespace sidelobe
