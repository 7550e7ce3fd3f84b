#include "v2g/icnn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <fmt/format.h>

#include "v2g/error.hpp"

namespace v2g {
namespace {

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                  std::string_view name, std::size_t layer) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(fmt::format("layer {}: {} is {}x{}, expected {}x{}", layer,
                                     name, m.rows(), m.cols(), rows, cols));
  }
}

void expect_len(const Vector& v, std::size_t n, std::string_view name,
                std::size_t layer) {
  if (v.size() != n) {
    throw DimensionError(fmt::format("layer {}: {} has length {}, expected {}",
                                     layer, name, v.size(), n));
  }
}

bool all_finite(std::span<const double> v) {
  for (double a : v)
    if (!std::isfinite(a)) return false;
  return true;
}

void clamp_nonnegative(Matrix& m) {
  for (double& v : m.values())
    if (v < 0.0) v = 0.0;
}

bool nonnegative(const Matrix& m) {
  for (double v : m.values())
    if (!(v >= 0.0)) return false;
  return true;
}

double glorot_radius(std::size_t fan_in, std::size_t fan_out) {
  const auto s = static_cast<double>(fan_in + fan_out);
  return s > 0 ? std::sqrt(6.0 / s) : 0.0;
}

void fill_uniform(std::span<double> v, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& a : v) a = dist(rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// FICNN

void FicnnWeights::validate_shapes() const {
  if (layers.empty()) throw DimensionError("FICNN has no layers");
  std::size_t in = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& L = layers[i];
    const std::size_t out = L.b.size();
    expect_shape(L.W_y, out, n_y, "W_y", i);
    expect_shape(L.W_z, out, in, "W_z", i);
    in = out;
  }
  if (in != 1) {
    throw DimensionError(fmt::format("layer {}: output width is {}, expected 1",
                                     layers.size() - 1, in));
  }
}

bool FicnnWeights::satisfies_convexity() const {
  for (const auto& L : layers) {
    if (!is_convex_nondecreasing(L.activation) || !nonnegative(L.W_z)) return false;
  }
  return true;
}

FicnnWeights make_ficnn(const FicnnArch& arch) {
  if (arch.widths.empty() || arch.widths.back() != 1 || arch.n_y == 0)
    throw ConfigError("FICNN widths must be non-empty and end in 1");
  if (!is_convex_nondecreasing(arch.activation) ||
      !is_convex_nondecreasing(arch.output_activation))
    throw ConfigError("FICNN activations must be convex and nondecreasing");
  FicnnWeights w;
  w.n_y = arch.n_y;
  std::size_t in = 0;
  for (std::size_t i = 0; i < arch.widths.size(); ++i) {
    const std::size_t out = arch.widths[i];
    FicnnLayer L;
    L.W_y = Matrix(out, arch.n_y);
    L.W_z = Matrix(out, in);
    L.b.assign(out, 0.0);
    L.activation = i + 1 == arch.widths.size() ? arch.output_activation : arch.activation;
    w.layers.push_back(std::move(L));
    in = out;
  }
  return w;
}

FicnnWeights init_ficnn(const FicnnArch& arch, std::uint64_t seed) {
  FicnnWeights w = make_ficnn(arch);
  std::mt19937_64 rng(seed);
  for (auto& L : w.layers) {
    const std::size_t out = L.b.size();
    const double ry = glorot_radius(arch.n_y, out);
    fill_uniform(L.W_y.values(), -ry, ry, rng);
    const double rz = glorot_radius(L.W_z.cols(), out);
    fill_uniform(L.W_z.values(), 0.0, rz, rng);
  }
  return w;
}

double ficnn_forward(const FicnnWeights& w, std::span<const double> y) {
  w.validate_shapes();
  if (y.size() != w.n_y)
    throw DimensionError(fmt::format("input y has length {}, expected {}", y.size(), w.n_y));
  Vector z, pre, tmp;
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    const auto& L = w.layers[i];
    pre.assign(L.b.begin(), L.b.end());
    tmp.resize(L.b.size());
    matvec(L.W_y, y, tmp);
    for (std::size_t r = 0; r < pre.size(); ++r) pre[r] += tmp[r];
    if (!z.empty()) {
      matvec(L.W_z, z, tmp);
      for (std::size_t r = 0; r < pre.size(); ++r) pre[r] += tmp[r];
    }
    z.resize(pre.size());
    for (std::size_t r = 0; r < pre.size(); ++r) z[r] = activate(L.activation, pre[r]);
    if (!all_finite(z))
      throw NumericError(fmt::format("FICNN layer {}: non-finite activation", i));
  }
  return z[0];
}

void enforce_convexity_inplace(FicnnWeights& w) {
  for (auto& L : w.layers) clamp_nonnegative(L.W_z);
}

FicnnWeights enforce_convexity(FicnnWeights w) {
  enforce_convexity_inplace(w);
  return w;
}

// ---------------------------------------------------------------------------
// PICNN

void PicnnArch::validate() const {
  if (n_x == 0 || n_y == 0) throw ConfigError("PICNN needs n_x >= 1 and n_y >= 1");
  if (convex_widths.empty() || convex_widths.back() != 1)
    throw ConfigError("convex_widths must be non-empty and end in 1");
  if (nonconvex_widths.size() + 1 != convex_widths.size())
    throw ConfigError(fmt::format(
        "nonconvex_widths must have {} entries (one fewer than convex_widths)",
        convex_widths.size() - 1));
  for (auto v : convex_widths)
    if (v == 0) throw ConfigError("convex_widths entries must be positive");
  for (auto v : nonconvex_widths)
    if (v == 0) throw ConfigError("nonconvex_widths entries must be positive");
  if (!is_convex_nondecreasing(convex_activation) ||
      !is_convex_nondecreasing(output_activation))
    throw ConfigError("convex-path activations must be convex and nondecreasing");
}

PicnnScaling PicnnScaling::identity(std::size_t n_x, std::size_t n_y) {
  PicnnScaling s;
  s.x_shift.assign(n_x, 0.0);
  s.x_scale.assign(n_x, 1.0);
  s.y_shift.assign(n_y, 0.0);
  s.y_scale.assign(n_y, 1.0);
  return s;
}

PicnnArch PicnnWeights::arch() const {
  PicnnArch a;
  a.n_x = n_x;
  a.n_y = n_y;
  a.convex_widths.clear();
  a.nonconvex_widths.clear();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    a.convex_widths.push_back(layers[i].b.size());
    if (i + 1 < layers.size()) a.nonconvex_widths.push_back(layers[i].bt.size());
  }
  if (!layers.empty()) {
    a.convex_activation = layers.front().activation;
    a.output_activation = layers.back().activation;
    a.nonconvex_activation = layers.front().nonconvex_activation;
  }
  return a;
}

void PicnnWeights::validate_shapes() const {
  if (layers.empty()) throw DimensionError("PICNN has no layers");
  std::size_t u_in = n_x;
  std::size_t z_in = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& L = layers[i];
    const std::size_t z_out = L.b.size();
    const bool last = i + 1 == layers.size();
    const std::size_t u_out = L.bt.size();
    if (last && (u_out != 0 || L.Wt.size() != 0))
      throw DimensionError(fmt::format("layer {}: last layer must not carry Wt/bt", i));
    if (!last) {
      if (u_out == 0) throw DimensionError(fmt::format("layer {}: bt is empty", i));
      expect_shape(L.Wt, u_out, u_in, "Wt", i);
    }
    expect_shape(L.W_zu, z_in, u_in, "W_zu", i);
    expect_len(L.b_z, z_in, "b_z", i);
    expect_shape(L.W_yu, n_y, u_in, "W_yu", i);
    expect_len(L.b_y, n_y, "b_y", i);
    expect_shape(L.W_u, z_out, u_in, "W_u", i);
    expect_shape(L.W_z, z_out, z_in, "W_z", i);
    expect_shape(L.W_y, z_out, n_y, "W_y", i);
    z_in = z_out;
    u_in = u_out;
  }
  if (z_in != 1)
    throw DimensionError(fmt::format("layer {}: output width is {}, expected 1",
                                     layers.size() - 1, z_in));
  if (scaling.x_shift.size() != n_x || scaling.x_scale.size() != n_x ||
      scaling.y_shift.size() != n_y || scaling.y_scale.size() != n_y)
    throw DimensionError("scaling vectors do not match n_x / n_y");
}

bool PicnnWeights::satisfies_convexity() const {
  for (const auto& L : layers) {
    if (!is_convex_nondecreasing(L.activation) || !nonnegative(L.W_z)) return false;
  }
  for (double s : scaling.y_scale)
    if (!(s > 0.0)) return false;
  return scaling.out_scale > 0.0;
}

PicnnWeights make_picnn(const PicnnArch& arch) {
  arch.validate();
  PicnnWeights w;
  w.n_x = arch.n_x;
  w.n_y = arch.n_y;
  w.scaling = PicnnScaling::identity(arch.n_x, arch.n_y);
  const std::size_t k = arch.convex_widths.size();
  std::size_t u_in = arch.n_x;
  std::size_t z_in = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t z_out = arch.convex_widths[i];
    const bool last = i + 1 == k;
    PicnnLayer L;
    if (!last) {
      const std::size_t u_out = arch.nonconvex_widths[i];
      L.Wt = Matrix(u_out, u_in);
      L.bt.assign(u_out, 0.0);
    }
    L.nonconvex_activation = arch.nonconvex_activation;
    L.W_zu = Matrix(z_in, u_in);
    L.b_z.assign(z_in, 0.0);
    L.W_yu = Matrix(arch.n_y, u_in);
    L.b_y.assign(arch.n_y, 0.0);
    L.W_u = Matrix(z_out, u_in);
    L.b.assign(z_out, 0.0);
    L.W_z = Matrix(z_out, z_in);
    L.W_y = Matrix(z_out, arch.n_y);
    L.activation = last ? arch.output_activation : arch.convex_activation;
    u_in = last ? 0 : arch.nonconvex_widths[i];
    z_in = z_out;
    w.layers.push_back(std::move(L));
  }
  return w;
}

PicnnWeights init_picnn(const PicnnArch& arch, std::uint64_t seed) {
  PicnnWeights w = make_picnn(arch);
  std::mt19937_64 rng(seed);
  for (auto& L : w.layers) {
    const std::size_t u_in = L.W_u.cols();
    const std::size_t z_in = L.W_z.cols();
    const std::size_t z_out = L.b.size();
    if (L.Wt.size() > 0) {
      const double r = glorot_radius(u_in, L.Wt.rows());
      fill_uniform(L.Wt.values(), -r, r, rng);
    }
    double r = glorot_radius(u_in, z_in);
    fill_uniform(L.W_zu.values(), -r, r, rng);
    // positive gate bias so the z-path starts open
    std::fill(L.b_z.begin(), L.b_z.end(), 1.0);
    r = glorot_radius(u_in, w.n_y);
    fill_uniform(L.W_yu.values(), -r, r, rng);
    std::fill(L.b_y.begin(), L.b_y.end(), 1.0);
    r = glorot_radius(u_in, z_out);
    fill_uniform(L.W_u.values(), -r, r, rng);
    r = glorot_radius(z_in, z_out);
    fill_uniform(L.W_z.values(), 0.0, r, rng);
    r = glorot_radius(w.n_y, z_out);
    fill_uniform(L.W_y.values(), -r, r, rng);
  }
  return w;
}

void enforce_convexity_inplace(PicnnWeights& w) {
  for (auto& L : w.layers) clamp_nonnegative(L.W_z);
}

PicnnWeights enforce_convexity(PicnnWeights w) {
  enforce_convexity_inplace(w);
  return w;
}

PicnnWeights zeros_like(const PicnnWeights& w) {
  PicnnWeights z = w;
  for_each_tensor(z, [](std::string_view, std::size_t, std::span<double> v, bool) {
    std::fill(v.begin(), v.end(), 0.0);
  });
  return z;
}

std::size_t parameter_count(const PicnnWeights& w) {
  std::size_t n = 0;
  for_each_tensor(w, [&](std::string_view, std::size_t, std::span<const double> v, bool) {
    n += v.size();
  });
  return n;
}

double PicnnTape::forward(const PicnnWeights& w, std::span<const double> x,
                          std::span<const double> y) {
  w.validate_shapes();
  if (x.size() != w.n_x)
    throw DimensionError(fmt::format("input x has length {}, expected {}", x.size(), w.n_x));
  if (y.size() != w.n_y)
    throw DimensionError(fmt::format("input y has length {}, expected {}", y.size(), w.n_y));
  const auto& s = w.scaling;
  const std::size_t k = w.layers.size();
  layers_.resize(k);
  z_.resize(k + 1);
  z_[0].clear();

  y_scaled_.resize(w.n_y);
  for (std::size_t j = 0; j < w.n_y; ++j) y_scaled_[j] = (y[j] - s.y_shift[j]) / s.y_scale[j];
  auto& u0 = layers_[0].u;
  u0.resize(w.n_x);
  for (std::size_t j = 0; j < w.n_x; ++j) u0[j] = (x[j] - s.x_shift[j]) / s.x_scale[j];
  if (!all_finite(u0) || !all_finite(y_scaled_))
    throw NumericError("PICNN input: non-finite value after scaling");

  for (std::size_t i = 0; i < k; ++i) {
    const auto& L = w.layers[i];
    auto& T = layers_[i];
    const auto& z = z_[i];
    const std::size_t z_in = L.W_z.cols();
    const std::size_t z_out = L.b.size();

    T.a_zu.resize(z_in);
    matvec(L.W_zu, T.u, T.a_zu);
    T.uz.resize(z_in);
    T.zin.resize(z_in);
    for (std::size_t r = 0; r < z_in; ++r) {
      T.a_zu[r] += L.b_z[r];
      T.uz[r] = T.a_zu[r] > 0.0 ? T.a_zu[r] : 0.0;
      T.zin[r] = z[r] * T.uz[r];
    }
    T.uy.resize(w.n_y);
    matvec(L.W_yu, T.u, T.uy);
    T.yin.resize(w.n_y);
    for (std::size_t r = 0; r < w.n_y; ++r) {
      T.uy[r] += L.b_y[r];
      T.yin[r] = y_scaled_[r] * T.uy[r];
    }

    T.pre.resize(z_out);
    matvec(L.W_u, T.u, T.pre);
    tmp_.resize(z_out);
    matvec(L.W_y, T.yin, tmp_);
    for (std::size_t r = 0; r < z_out; ++r) T.pre[r] += tmp_[r] + L.b[r];
    if (z_in > 0) {
      matvec(L.W_z, T.zin, tmp_);
      for (std::size_t r = 0; r < z_out; ++r) T.pre[r] += tmp_[r];
    }
    auto& z_next = z_[i + 1];
    z_next.resize(z_out);
    for (std::size_t r = 0; r < z_out; ++r) z_next[r] = activate(L.activation, T.pre[r]);
    if (!all_finite(z_next))
      throw NumericError(fmt::format("PICNN layer {} convex path: non-finite value", i));

    if (i + 1 < k) {
      const std::size_t u_out = L.bt.size();
      T.pre_t.resize(u_out);
      matvec(L.Wt, T.u, T.pre_t);
      auto& u_next = layers_[i + 1].u;
      u_next.resize(u_out);
      for (std::size_t r = 0; r < u_out; ++r) {
        T.pre_t[r] += L.bt[r];
        u_next[r] = activate(L.nonconvex_activation, T.pre_t[r]);
      }
      if (!all_finite(u_next))
        throw NumericError(fmt::format("PICNN layer {} nonconvex path: non-finite value", i));
    }
  }
  return s.out_shift + s.out_scale * z_[k][0];
}

void PicnnTape::backward(const PicnnWeights& w, double upstream, PicnnWeights* grad,
                         std::span<double> dy, std::span<double> dx) {
  const std::size_t k = w.layers.size();
  if (layers_.size() != k) throw Error("PicnnTape::backward called before forward");
  const auto& s = w.scaling;

  Vector dy_scaled(w.n_y, 0.0);
  dz_.assign(1, upstream * s.out_scale);
  du_next_.clear();

  for (std::size_t ii = k; ii-- > 0;) {
    const auto& L = w.layers[ii];
    const auto& T = layers_[ii];
    PicnnLayer* G = grad ? &grad->layers[ii] : nullptr;
    const std::size_t z_in = L.W_z.cols();
    const std::size_t z_out = L.b.size();
    const std::size_t u_in = T.u.size();

    dpre_.resize(z_out);
    for (std::size_t r = 0; r < z_out; ++r)
      dpre_[r] = dz_[r] * activate_derivative(L.activation, T.pre[r]);

    du_.assign(u_in, 0.0);

    // nonconvex path: u_{i+1} = gt(Wt u_i + bt)
    if (ii + 1 < k) {
      const std::size_t u_out = L.bt.size();
      tmp_.resize(u_out);
      for (std::size_t r = 0; r < u_out; ++r)
        tmp_[r] = du_next_[r] * activate_derivative(L.nonconvex_activation, T.pre_t[r]);
      if (G) {
        outer_add(G->Wt, tmp_, T.u);
        for (std::size_t r = 0; r < u_out; ++r) G->bt[r] += tmp_[r];
      }
      matvec_transposed_add(L.Wt, tmp_, du_);
    }

    // u^(u) term
    if (G) {
      outer_add(G->W_u, dpre_, T.u);
      for (std::size_t r = 0; r < z_out; ++r) G->b[r] += dpre_[r];
    }
    matvec_transposed_add(L.W_u, dpre_, du_);

    // y-path: W_y (y' * uy)
    if (G) outer_add(G->W_y, dpre_, T.yin);
    dyin_.assign(w.n_y, 0.0);
    matvec_transposed_add(L.W_y, dpre_, dyin_);
    tmp_.resize(w.n_y);
    for (std::size_t r = 0; r < w.n_y; ++r) {
      dy_scaled[r] += dyin_[r] * T.uy[r];
      tmp_[r] = dyin_[r] * y_scaled_[r];  // d/d(uy)
    }
    if (G) {
      outer_add(G->W_yu, tmp_, T.u);
      for (std::size_t r = 0; r < w.n_y; ++r) G->b_y[r] += tmp_[r];
    }
    matvec_transposed_add(L.W_yu, tmp_, du_);

    // z-path: W_z (z_i * relu(W_zu u + b_z))
    Vector dz_prev(z_in, 0.0);
    if (z_in > 0) {
      const auto& z = z_[ii];
      if (G) outer_add(G->W_z, dpre_, T.zin);
      dzin_.assign(z_in, 0.0);
      matvec_transposed_add(L.W_z, dpre_, dzin_);
      tmp_.resize(z_in);
      for (std::size_t r = 0; r < z_in; ++r) {
        dz_prev[r] = dzin_[r] * T.uz[r];
        tmp_[r] = T.a_zu[r] > 0.0 ? dzin_[r] * z[r] : 0.0;
      }
      if (G) {
        outer_add(G->W_zu, tmp_, T.u);
        for (std::size_t r = 0; r < z_in; ++r) G->b_z[r] += tmp_[r];
      }
      matvec_transposed_add(L.W_zu, tmp_, du_);
    }

    dz_ = std::move(dz_prev);
    du_next_.swap(du_);
  }

  if (!dy.empty()) {
    for (std::size_t j = 0; j < w.n_y; ++j) dy[j] = dy_scaled[j] / s.y_scale[j];
  }
  if (!dx.empty()) {
    for (std::size_t j = 0; j < w.n_x; ++j) dx[j] = du_next_[j] / s.x_scale[j];
  }
}

double picnn_forward(const PicnnWeights& w, const PicnnInput& in) {
  PicnnTape tape;
  return tape.forward(w, in.x, in.y);
}

PicnnGradient picnn_backward(const PicnnWeights& w, const PicnnInput& in,
                             double upstream) {
  PicnnTape tape;
  PicnnGradient g;
  g.value = tape.forward(w, in.x, in.y);
  g.weights = zeros_like(w);
  g.y.assign(w.n_y, 0.0);
  g.x.assign(w.n_x, 0.0);
  tape.backward(w, upstream, &g.weights, g.y, g.x);
  return g;
}

}  // namespace v2g
