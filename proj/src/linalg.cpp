#include "v2g/linalg.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

namespace v2g {

void matvec(const Matrix& m, std::span<const double> x, std::span<double> out) {
  assert(x.size() == m.cols() && out.size() == m.rows());
  const auto vals = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double acc = 0.0;
    const double* row = vals.data() + r * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

void matvec_transposed_add(const Matrix& m, std::span<const double> x,
                           std::span<double> out) {
  assert(x.size() == m.rows() && out.size() == m.cols());
  const auto vals = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = vals.data() + r * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) out[c] += row[c] * xr;
  }
}

void outer_add(Matrix& m, std::span<const double> a, std::span<const double> b,
               double scale) {
  assert(a.size() == m.rows() && b.size() == m.cols());
  auto vals = m.values();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ar = scale * a[r];
    if (ar == 0.0) continue;
    double* row = vals.data() + r * m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += ar * b[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace v2g
