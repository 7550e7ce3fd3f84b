#pragma once

// Input-convex networks.
//
// FICNN: z_{i+1} = g_i(W_z[i] z_i + W_y[i] y + b[i]),  i = 0..k-1
// PICNN: a nonconvex path u_{i+1} = gt_i(Wt[i] u_i + bt[i]) with u_0 = x gates a
// convex path
//   z_{i+1} = g_i(W_z[i] (z_i * relu(W_zu[i] u_i + b_z[i]))
//               + W_y[i] (y * (W_yu[i] u_i + b_y[i]))
//               + W_u[i] u_i + b[i])
// In both networks z_0 is the empty (zero-width) state, so the first layer has
// no W_z contribution. The output z_k is convex in y whenever every W_z entry
// is non-negative and every g_i is convex and nondecreasing.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "v2g/activation.hpp"
#include "v2g/linalg.hpp"

namespace v2g {

// ---------------------------------------------------------------------------
// FICNN

struct FicnnArch {
  std::size_t n_y = 1;
  std::vector<std::size_t> widths{32, 8, 1};  // last entry must be 1
  Activation activation = Activation::softplus;
  Activation output_activation = Activation::softplus;
};

struct FicnnLayer {
  Matrix W_y;  // out x n_y
  Matrix W_z;  // out x in (in = 0 for the first layer)
  Vector b;    // out
  Activation activation = Activation::softplus;
};

struct FicnnWeights {
  std::size_t n_y = 0;
  std::vector<FicnnLayer> layers;

  /// Throws DimensionError naming the first inconsistent layer.
  void validate_shapes() const;
  bool satisfies_convexity() const;
};

FicnnWeights make_ficnn(const FicnnArch& arch);
FicnnWeights init_ficnn(const FicnnArch& arch, std::uint64_t seed);

double ficnn_forward(const FicnnWeights& w, std::span<const double> y);

/// Clamps W_z entries at zero; every other weight is left untouched.
FicnnWeights enforce_convexity(FicnnWeights w);
void enforce_convexity_inplace(FicnnWeights& w);

// ---------------------------------------------------------------------------
// PICNN

struct PicnnArch {
  std::size_t n_x = 2;
  std::size_t n_y = 1;
  std::vector<std::size_t> convex_widths{32, 8, 1};  // last entry must be 1
  std::vector<std::size_t> nonconvex_widths{32, 8};  // one fewer than convex
  Activation convex_activation = Activation::softplus;
  Activation output_activation = Activation::softplus;
  Activation nonconvex_activation = Activation::tanh;

  /// Throws ConfigError on an unusable architecture.
  void validate() const;
};

struct PicnnLayer {
  // nonconvex path; empty in the last layer
  Matrix Wt;
  Vector bt;
  Activation nonconvex_activation = Activation::tanh;

  Matrix W_zu;  // z_in x u_in
  Vector b_z;   // z_in
  Matrix W_yu;  // n_y x u_in
  Vector b_y;   // n_y
  Matrix W_u;   // z_out x u_in
  Vector b;     // z_out
  Matrix W_z;   // z_out x z_in, elementwise >= 0
  Matrix W_y;   // z_out x n_y
  Activation activation = Activation::softplus;
};

/// Fixed affine maps around the network: x' = (x - x_shift) / x_scale,
/// y' = (y - y_shift) / y_scale, out = out_shift + out_scale * z_k. Positive
/// y_scale and out_scale keep the composite convex in y. Not trained.
struct PicnnScaling {
  Vector x_shift, x_scale;
  Vector y_shift, y_scale;
  double out_shift = 0.0;
  double out_scale = 1.0;

  static PicnnScaling identity(std::size_t n_x, std::size_t n_y);
  bool operator==(const PicnnScaling&) const = default;
};

struct PicnnInput {
  Vector x;  // nonconvex inputs: elapsed time [h], temperature [degC]
  Vector y;  // convex inputs: signed C-rate [1/h]
};

struct PicnnWeights {
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  std::vector<PicnnLayer> layers;
  PicnnScaling scaling;

  PicnnArch arch() const;
  void validate_shapes() const;
  /// W_z >= 0 everywhere, convex-path activations admissible, scales positive.
  bool satisfies_convexity() const;
};

/// All-zero weights with the given shapes and identity scaling.
PicnnWeights make_picnn(const PicnnArch& arch);

/// Glorot-uniform init; W_z drawn from [0, r] so the start is feasible.
PicnnWeights init_picnn(const PicnnArch& arch, std::uint64_t seed);

PicnnWeights enforce_convexity(PicnnWeights w);
void enforce_convexity_inplace(PicnnWeights& w);

/// Visits every trainable tensor in a fixed order. The callback receives
/// (name, layer index, values, must_be_nonnegative).
template <class Weights, class F>
void for_each_tensor(Weights& w, F&& f) {
  for (std::size_t i = 0; i < w.layers.size(); ++i) {
    auto& L = w.layers[i];
    f("Wt", i, L.Wt.values(), false);
    f("bt", i, std::span(L.bt), false);
    f("W_zu", i, L.W_zu.values(), false);
    f("b_z", i, std::span(L.b_z), false);
    f("W_yu", i, L.W_yu.values(), false);
    f("b_y", i, std::span(L.b_y), false);
    f("W_u", i, L.W_u.values(), false);
    f("b", i, std::span(L.b), false);
    f("W_z", i, L.W_z.values(), true);
    f("W_y", i, L.W_y.values(), false);
  }
}

std::size_t parameter_count(const PicnnWeights& w);

/// Copy of w with every trainable tensor zeroed (scaling kept).
PicnnWeights zeros_like(const PicnnWeights& w);

/// Reusable buffers for one forward/backward pass. Not thread-safe; use one
/// tape per thread. The weights passed to backward() must be the ones used
/// in the preceding forward().
class PicnnTape {
 public:
  double forward(const PicnnWeights& w, std::span<const double> x,
                 std::span<const double> y);

  /// Accumulates upstream * d(out)/d(weights) into grad (same shapes as w),
  /// and writes d(out)/dy, d(out)/dx scaled by upstream into dy / dx when
  /// those spans are non-empty.
  void backward(const PicnnWeights& w, double upstream, PicnnWeights* grad,
                std::span<double> dy, std::span<double> dx);

 private:
  struct Layer {
    Vector u;       // u_i (scaled input for i = 0)
    Vector a_zu;    // W_zu u + b_z
    Vector uz;      // relu(a_zu)
    Vector uy;      // W_yu u + b_y
    Vector zin;     // z_i * uz
    Vector yin;     // y' * uy
    Vector pre;     // convex pre-activation
    Vector pre_t;   // nonconvex pre-activation
  };
  std::vector<Layer> layers_;
  std::vector<Vector> z_;  // z_0..z_k
  Vector y_scaled_;
  // backward scratch
  Vector dpre_, dz_, dzin_, dyin_, du_, du_next_, tmp_;
};

double picnn_forward(const PicnnWeights& w, const PicnnInput& in);

struct PicnnGradient {
  double value = 0.0;
  PicnnWeights weights;  // d(out)/d(each weight), same shapes
  Vector y;              // d(out)/dy
  Vector x;              // d(out)/dx
};

/// Exact reverse-mode gradient of upstream * picnn_forward(w, in).
PicnnGradient picnn_backward(const PicnnWeights& w, const PicnnInput& in,
                             double upstream = 1.0);

}  // namespace v2g
