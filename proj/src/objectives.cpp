#include "v2g/objectives.hpp"

#include <fmt/format.h>

#include "v2g/error.hpp"

namespace v2g {
namespace {

void check_rho(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0))
    throw ConfigError(fmt::format("rho = {} outside [0, 1]", rho));
}

void check_weights(const PicnnWeights& w) {
  w.validate_shapes();
  if (w.n_x != 2 || w.n_y != 1)
    throw DimensionError("degradation network must have n_x = 2 and n_y = 1");
  if (!w.satisfies_convexity())
    throw ConfigError("degradation network violates the convexity constraints");
}

}  // namespace

double theta1(std::span<const double> u, std::span<const double> alpha, double dt) {
  if (u.size() != alpha.size())
    throw DimensionError(
        fmt::format("theta1: schedule has {} entries, tariff {}", u.size(), alpha.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += alpha[i] * u[i] * dt;
  return acc;
}

ChargingObjective::ChargingObjective(const ChargingProblem& problem,
                                     const PicnnWeights& weights)
    : weights_(&weights),
      pack_(problem.pack),
      alpha_(problem.alpha),
      temps_(problem.temp_c),
      times_(problem.horizon_times()),
      rho_(problem.rho) {
  problem.validate();
  check_weights(weights);
}

void ChargingObjective::check_length(std::span<const double> u) const {
  if (u.size() != alpha_.size())
    throw DimensionError(
        fmt::format("schedule has {} entries, horizon is {}", u.size(), alpha_.size()));
}

CostBreakdown ChargingObjective::evaluate(std::span<const double> u) const {
  check_length(u);
  CostBreakdown c;
  c.theta1 = theta1(u, alpha_, pack_.dt);
  PicnnTape tape;
  double q = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x[2] = {times_[i], temps_[i]};
    const double y[1] = {u[i] / pack_.capacity_kwh};
    q += tape.forward(*weights_, x, y);
  }
  c.theta2 = pack_.zeta() * q;
  c.J = rho_ * c.theta1 + (1.0 - rho_) * c.theta2;
  return c;
}

double ChargingObjective::gradient(std::span<const double> u, std::span<double> grad) const {
  check_length(u);
  if (grad.size() != u.size()) throw DimensionError("gradient buffer has the wrong length");
  const double zeta = pack_.zeta();
  const double deg_weight = (1.0 - rho_) * zeta / pack_.capacity_kwh;
  PicnnTape tape;
  double q = 0.0;
  double t1 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x[2] = {times_[i], temps_[i]};
    const double y[1] = {u[i] / pack_.capacity_kwh};
    q += tape.forward(*weights_, x, y);
    double dy[1] = {0.0};
    tape.backward(*weights_, 1.0, nullptr, dy, {});
    grad[i] = rho_ * alpha_[i] * pack_.dt + deg_weight * dy[0];
    t1 += alpha_[i] * u[i] * pack_.dt;
  }
  return rho_ * t1 + (1.0 - rho_) * (zeta * q);
}

double theta2(std::span<const double> u, std::span<const double> temps,
              std::span<const double> horizon_times, const PackParams& pack,
              const PicnnWeights& weights) {
  if (temps.size() != u.size() || horizon_times.size() != u.size())
    throw DimensionError(fmt::format("theta2: lengths differ (u {}, temps {}, times {})",
                                     u.size(), temps.size(), horizon_times.size()));
  check_weights(weights);
  PicnnTape tape;
  double q = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x[2] = {horizon_times[i], temps[i]};
    const double y[1] = {u[i] / pack.capacity_kwh};
    q += tape.forward(weights, x, y);
  }
  return pack.zeta() * q;
}

double objective_J(std::span<const double> u, double rho, std::span<const double> alpha,
                   std::span<const double> temps, std::span<const double> horizon_times,
                   const PackParams& pack, const PicnnWeights& weights) {
  check_rho(rho);
  return rho * theta1(u, alpha, pack.dt) +
         (1.0 - rho) * theta2(u, temps, horizon_times, pack, weights);
}

Vector grad_J(std::span<const double> u, double rho, std::span<const double> alpha,
              std::span<const double> temps, std::span<const double> horizon_times,
              const PackParams& pack, const PicnnWeights& weights) {
  check_rho(rho);
  if (u.size() != alpha.size() || temps.size() != u.size() || horizon_times.size() != u.size())
    throw DimensionError("grad_J: input lengths differ");
  check_weights(weights);
  const double deg_weight = (1.0 - rho) * pack.zeta() / pack.capacity_kwh;
  PicnnTape tape;
  Vector g(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x[2] = {horizon_times[i], temps[i]};
    const double y[1] = {u[i] / pack.capacity_kwh};
    tape.forward(weights, x, y);
    double dy[1] = {0.0};
    tape.backward(weights, 1.0, nullptr, dy, {});
    g[i] = rho * alpha[i] * pack.dt + deg_weight * dy[0];
  }
  return g;
}

}  // namespace v2g
