#include "v2g/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

#include <fmt/format.h>

#include "v2g/data.hpp"
#include "v2g/error.hpp"

namespace v2g {

void SolveConfig::validate() const {
  if (step_size && !(*step_size > 0.0)) throw ConfigError("solve: step_size must be > 0");
  if (max_iters < 1) throw ConfigError("solve: max_iters must be >= 1");
  if (!(stop_tol > 0.0)) throw ConfigError("solve: stop_tol must be > 0");
}

Vector initial_point(const FeasibleSet& set) {
  const Vector zero(set.horizon(), 0.0);
  return set.project(zero);
}

double estimate_lipschitz(const ChargingObjective& objective, const FeasibleSet& set,
                          std::span<const double> start, std::uint64_t seed) {
  const std::size_t n = set.horizon();
  const double p_max = set.pack().p_max;
  const double h = 1e-4 * p_max;
  constexpr std::size_t kSamplePoints = 8;
  constexpr std::size_t kPowerIters = 30;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-p_max, p_max);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Vector point(start.begin(), start.end());
  Vector v(n), hv(n), gp(n), gm(n), up(n), um(n);
  double lipschitz = 0.0;
  for (std::size_t s = 0; s <= kSamplePoints; ++s) {
    if (s > 0)
      for (auto& p : point) p = box(rng);
    for (auto& a : v) a = gauss(rng);
    double nv = norm2(v);
    for (auto& a : v) a /= nv;
    double lambda = 0.0;
    for (std::size_t it = 0; it < kPowerIters; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        up[i] = point[i] + h * v[i];
        um[i] = point[i] - h * v[i];
      }
      objective.gradient(up, gp);
      objective.gradient(um, gm);
      for (std::size_t i = 0; i < n; ++i) hv[i] = (gp[i] - gm[i]) / (2.0 * h);
      lambda = dot(v, hv);
      const double nh = norm2(hv);
      if (!(nh > 0.0)) break;
      for (std::size_t i = 0; i < n; ++i) v[i] = hv[i] / nh;
    }
    lipschitz = std::max(lipschitz, std::abs(lambda));
  }
  return lipschitz;
}

Schedule solve(const ChargingProblem& problem, const PicnnWeights& weights,
               const SolveConfig& config, std::optional<std::span<const double>> warm_start) {
  config.validate();
  problem.validate();
  const FeasibleSet set(problem.pack, problem.horizon());
  const ChargingObjective objective(problem, weights);
  const std::size_t n = set.horizon();

  Vector u = warm_start ? set.project(*warm_start, config.projection)
                        : set.project(Vector(n, 0.0), config.projection);
  Vector grad(n), trial(n), next(n);
  double J = objective.gradient(u, grad);

  double tau = 0.0;
  if (config.step_size) {
    tau = *config.step_size;
  } else {
    const double lipschitz = estimate_lipschitz(objective, set, u, config.seed);
    // With a (near) linear objective any step is safe; cap it so one step
    // moves at most a few multiples of the power range.
    const double g_inf = std::max(norm_inf(grad), 1e-12);
    const double cap = 10.0 * problem.pack.p_max / g_inf;
    tau = lipschitz > 0.0 ? std::min(0.9 / lipschitz, cap) : cap;
  }

  Schedule out;
  out.rho = problem.rho;
  const bool safeguard = !config.step_size || config.backtracking;
  for (std::size_t it = 1; it <= config.max_iters; ++it) {
    double J_next = 0.0;
    Vector grad_next(n);
    while (true) {
      for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] - tau * grad[i];
      next = set.project(trial, config.projection);
      J_next = objective.gradient(next, grad_next);
      if (J_next <= J + 1e-9 || !safeguard || tau < 1e-300) break;
      tau *= 0.5;
      ++out.step_reductions;
    }
    if (J_next > J + 1e-9) out.monotone = false;
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - u[i]));
    u.swap(next);
    grad.swap(grad_next);
    J = J_next;
    out.iterations = it;
    if (change <= config.stop_tol) {
      out.converged = true;
      break;
    }
  }

  for (std::size_t i = 0; i < n; ++i) trial[i] = u[i] - tau * grad[i];
  next = set.project(trial, config.projection);
  for (std::size_t i = 0; i < n; ++i)
    out.fixed_point_residual = std::max(out.fixed_point_residual, std::abs(next[i] - u[i]));

  const CostBreakdown cost = objective.evaluate(u);
  out.theta1 = cost.theta1;
  out.theta2 = cost.theta2;
  out.J = cost.J;
  out.energy = set.energy_trajectory(u);
  out.alpha = problem.alpha;
  out.step_size = tau;
  out.u = std::move(u);
  return out;
}

nlohmann::json to_json(const Schedule& s) {
  return {{"u_kw", s.u},
          {"energy_pu", s.energy},
          {"alpha_eur_per_kwh", s.alpha},
          {"theta1_eur", s.theta1},
          {"theta2_eur", s.theta2},
          {"J_eur", s.J},
          {"rho", s.rho},
          {"iterations", s.iterations},
          {"converged", s.converged},
          {"step_size", s.step_size},
          {"fixed_point_residual", s.fixed_point_residual},
          {"step_reductions", s.step_reductions},
          {"monotone", s.monotone}};
}

void write_schedule_csv(std::ostream& out, const Schedule& s) {
  out << "interval,p_kw,energy_pu,alpha\n";
  for (std::size_t i = 0; i < s.u.size(); ++i)
    out << i + 1 << ',' << format_double(s.u[i]) << ',' << format_double(s.energy[i]) << ','
        << format_double(s.alpha[i]) << '\n';
}

nlohmann::json to_json(const SolveConfig& c) {
  nlohmann::json j = {{"max_iters", c.max_iters},
                      {"stop_tol", c.stop_tol},
                      {"seed", c.seed},
                      {"backtracking", c.backtracking},
                      {"projection_tolerance", c.projection.tolerance}};
  j["step_size"] = c.step_size ? nlohmann::json(*c.step_size) : nlohmann::json("auto");
  return j;
}

SolveConfig solve_config_from_json(const nlohmann::json& j) {
  SolveConfig c;
  try {
    if (j.contains("step_size")) {
      const auto& s = j.at("step_size");
      if (s.is_string()) {
        if (s.get<std::string>() != "auto")
          throw ConfigError("solve: step_size must be a number or \"auto\"");
      } else {
        c.step_size = s.get<double>();
      }
    }
    c.max_iters = j.value("max_iters", c.max_iters);
    c.stop_tol = j.value("stop_tol", c.stop_tol);
    c.seed = j.value("seed", c.seed);
    c.backtracking = j.value("backtracking", c.backtracking);
    c.projection.tolerance = j.value("projection_tolerance", c.projection.tolerance);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("solve config: {}", e.what()));
  }
  c.validate();
  return c;
}

}  // namespace v2g
