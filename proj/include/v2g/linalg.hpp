#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace v2g {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles. Shapes stay tiny (at most a few
/// dozen rows/cols), so no expression templates or BLAS.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = m * x (out is overwritten)
void matvec(const Matrix& m, std::span<const double> x, std::span<double> out);

// out += m^T * x
void matvec_transposed_add(const Matrix& m, std::span<const double> x,
                           std::span<double> out);

// m += scale * a b^T
void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b,
               double scale = 1.0);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double norm_inf(std::span<const double> a);

}  // namespace v2g
