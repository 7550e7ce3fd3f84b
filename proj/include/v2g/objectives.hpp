#pragma once

#include <span>

#include "v2g/icnn.hpp"
#include "v2g/linalg.hpp"
#include "v2g/problem.hpp"

namespace v2g {

/// Net charging cost sum_i alpha_i * u_i * dt [EUR]; negative means revenue.
double theta1(std::span<const double> u, std::span<const double> alpha, double dt);

/// Degradation cost zeta * sum_i f(x_i, y_i) [EUR] with
/// x_i = (horizon_times_i, temps_i) and y_i = u_i / capacity_kwh.
/// Convex in u when the weights satisfy the convexity constraints; throws
/// ConfigError otherwise.
double theta2(std::span<const double> u, std::span<const double> temps,
              std::span<const double> horizon_times, const PackParams& pack,
              const PicnnWeights& weights);

/// rho * theta1 + (1 - rho) * theta2; rho must be in [0, 1].
double objective_J(std::span<const double> u, double rho, std::span<const double> alpha,
                   std::span<const double> temps, std::span<const double> horizon_times,
                   const PackParams& pack, const PicnnWeights& weights);

/// Gradient of objective_J in u:
/// rho * alpha * dt + (1 - rho) * zeta / capacity_kwh * df/dy.
Vector grad_J(std::span<const double> u, double rho, std::span<const double> alpha,
              std::span<const double> temps, std::span<const double> horizon_times,
              const PackParams& pack, const PicnnWeights& weights);

struct CostBreakdown {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double J = 0.0;
};

/// The weighted objective bound to one problem and one trained network.
class ChargingObjective {
 public:
  ChargingObjective(const ChargingProblem& problem, const PicnnWeights& weights);

  std::size_t horizon() const { return alpha_.size(); }
  double rho() const { return rho_; }

  CostBreakdown evaluate(std::span<const double> u) const;
  double value(std::span<const double> u) const { return evaluate(u).J; }
  /// Writes the gradient into grad and returns J(u).
  double gradient(std::span<const double> u, std::span<double> grad) const;

 private:
  void check_length(std::span<const double> u) const;

  const PicnnWeights* weights_;
  PackParams pack_;
  Vector alpha_;
  Vector temps_;
  Vector times_;
  double rho_;
};

}  // namespace v2g
