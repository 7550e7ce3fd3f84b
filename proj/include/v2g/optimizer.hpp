#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>

#include <nlohmann/json.hpp>

#include "v2g/feasible_set.hpp"
#include "v2g/icnn.hpp"
#include "v2g/objectives.hpp"
#include "v2g/problem.hpp"

namespace v2g {

struct SolveConfig {
  std::optional<double> step_size;  // unset: 0.9 / L with L estimated
  std::size_t max_iters = 5000;
  double stop_tol = 1e-7;  // sup-norm change of u between iterates [kW]
  std::uint64_t seed = 7;  // sample points for the Lipschitz estimate
  bool backtracking = false;
  ProjectionOptions projection;

  void validate() const;
};

struct Schedule {
  Vector u;       // kW per interval, positive = charging
  Vector energy;  // E_1..E_T [p.u.]
  Vector alpha;   // tariff used [EUR/kWh]
  double theta1 = 0.0;
  double theta2 = 0.0;
  double J = 0.0;
  double rho = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double step_size = 0.0;
  double fixed_point_residual = 0.0;  // |proj(u - tau grad) - u|_inf at the end
  std::size_t step_reductions = 0;    // descent safeguard activations
  bool monotone = true;               // J never increased by more than 1e-9
};

/// Minimum-norm feasible schedule, project(0).
Vector initial_point(const FeasibleSet& set);

/// Largest Hessian eigenvalue of J found by power iteration on central
/// finite-difference Hessian-vector products, over the initial point and
/// seeded random points of the power box.
double estimate_lipschitz(const ChargingObjective& objective, const FeasibleSet& set,
                          std::span<const double> start, std::uint64_t seed);

/// Projected gradient descent u <- proj(u - tau * grad J(u)) from the
/// minimum-norm feasible point (or from the projection of warm_start).
/// Hitting max_iters yields converged = false rather than an exception.
Schedule solve(const ChargingProblem& problem, const PicnnWeights& weights,
               const SolveConfig& config = {},
               std::optional<std::span<const double>> warm_start = std::nullopt);

nlohmann::json to_json(const Schedule& s);
void write_schedule_csv(std::ostream& out, const Schedule& s);

nlohmann::json to_json(const SolveConfig& c);
SolveConfig solve_config_from_json(const nlohmann::json& j);

}  // namespace v2g
