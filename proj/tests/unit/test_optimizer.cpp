#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "generators.hpp"
#include "v2g/error.hpp"
#include "v2g/icnn_io.hpp"
#include "v2g/optimizer.hpp"

using namespace v2g;
using namespace v2g::testing;

namespace {

double sup_dist(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ChargingProblem evening_problem(std::size_t T, double rho, std::mt19937_64& rng) {
  ChargingProblem p;
  p.alpha = random_vector(rng, T, 0.05, 0.35);
  p.temp_c = random_vector(rng, T, 15.0, 30.0);
  p.rho = rho;
  return p;
}

const PicnnWeights& trained() {
  static const PicnnWeights w =
      load_picnn(std::string(V2G_SOURCE_DIR) + "/models/synthetic-picnn.json");
  return w;
}

}  // namespace

TEST_SUITE("optimizer") {

TEST_CASE("initial point: zero when e0 sits on e_des") {
  PackParams p = toy_pack();
  p.e0 = p.e_des;
  const FeasibleSet s(p, 6);
  for (double u : initial_point(s)) CHECK(u == 0.0);
}

TEST_CASE("initial point: energy bookkeeping from 0.2 to the band") {
  PackParams p;
  p.e0 = 0.2;
  p.e_des = 0.7;
  const FeasibleSet s(p, 48);
  const Vector u0 = initial_point(s);
  double kwh = 0.0;
  for (double u : u0) kwh += u * p.dt;
  const double mid = (p.e_des - p.e0) * p.capacity_kwh / p.eta_avg;
  const double half = p.epsilon * p.capacity_kwh / p.eta_avg;
  CHECK(kwh > 0.0);
  CHECK(kwh >= mid - half - 1e-9);
  CHECK(kwh <= mid + half + 1e-9);
  // minimum norm: the lower edge of the band, spread evenly
  CHECK(kwh == doctest::Approx(mid - half).epsilon(1e-9));
  for (double u : u0) CHECK(u == doctest::Approx(u0.front()).epsilon(1e-9));
  CHECK(initial_point(s) == u0);
}

TEST_CASE("rho = 1 matches an exhaustive grid search") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    const ChargingProblem prob = toy_problem(4, 1.0, rng);
    const PicnnWeights w = toy_network(rng);
    const GridResult grid = grid_search(prob, w, 0.25);
    REQUIRE(grid.feasible_points > 0);
    const Schedule s = solve(prob, w);
    CHECK(s.converged);
    CHECK(std::abs(s.J - grid.best) <= 1e-6);
    // bang-bang: the optimum is a vertex, which lies on the grid
    CHECK(sup_dist(s.u, grid.argmin) <= 1e-4);
  }
}

TEST_CASE("mixed rho is never worse than the grid") {
  std::mt19937_64 rng(2);
  for (double rho : {0.0, 0.3, 0.5, 0.8}) {
    for (int trial = 0; trial < 3; ++trial) {
      const ChargingProblem prob = toy_problem(4, rho, rng);
      const PicnnWeights w = toy_network(rng);
      const GridResult grid = grid_search(prob, w, 0.25);
      const Schedule s = solve(prob, w);
      CHECK(s.converged);
      CHECK(s.J <= grid.best + 1e-4);
    }
  }
}

TEST_CASE("rho = 0 with a network minimised at zero C-rate gives project(0)") {
  std::mt19937_64 rng(3);
  for (std::size_t T : {1u, 4u, 12u}) {
    const ChargingProblem prob = toy_problem(T, 0.0, rng);
    const PicnnWeights w = symmetric_network();
    const Schedule s = solve(prob, w);
    const Vector u0 = initial_point(FeasibleSet(prob.pack, T));
    CHECK(s.converged);
    CHECK(sup_dist(s.u, u0) <= 1e-6);
    for (double u : s.u) CHECK(u == doctest::Approx(0.5 / static_cast<double>(T)).epsilon(1e-6));
  }
}

TEST_CASE("schedule postconditions on the default pack") {
  std::mt19937_64 rng(4);
  for (double rho : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    const ChargingProblem prob = evening_problem(24, rho, rng);
    const PicnnWeights& w = trained();
    const Schedule s = solve(prob, w);
    const FeasibleSet set(prob.pack, 24);
    CHECK(s.converged);
    CHECK(s.monotone);
    CHECK(set.is_feasible(s.u, 1e-8));
    CHECK(std::abs(s.energy.back() - prob.pack.e_des) <= prob.pack.epsilon + 1e-8);
    CHECK(s.fixed_point_residual <= 10 * SolveConfig{}.stop_tol);
    CHECK(s.rho == rho);
    const ChargingObjective obj(prob, w);
    const CostBreakdown c = obj.evaluate(s.u);
    CHECK(std::abs(c.theta1 - s.theta1) <= 1e-10);
    CHECK(std::abs(c.theta2 - s.theta2) <= 1e-10);
    CHECK(std::abs(c.J - s.J) <= 1e-10);
    const Vector e = set.energy_trajectory(s.u);
    CHECK(sup_dist(e, s.energy) == 0.0);
    CHECK(s.alpha == prob.alpha);
  }
}

TEST_CASE("fixed-point certificate holds independently") {
  std::mt19937_64 rng(5);
  const ChargingProblem prob = evening_problem(16, 0.6, rng);
  const PicnnWeights& w = trained();
  const Schedule s = solve(prob, w);
  REQUIRE(s.converged);
  const ChargingObjective obj(prob, w);
  const FeasibleSet set(prob.pack, 16);
  Vector g(16), v(16);
  obj.gradient(s.u, g);
  for (std::size_t i = 0; i < 16; ++i) v[i] = s.u[i] - s.step_size * g[i];
  CHECK(sup_dist(set.project(v), s.u) <= 10 * SolveConfig{}.stop_tol);
}

TEST_CASE("identical inputs give identical schedules") {
  std::mt19937_64 rng(6);
  const ChargingProblem prob = evening_problem(32, 0.5, rng);
  const PicnnWeights& w = trained();
  const Schedule a = solve(prob, w);
  const Schedule b = solve(prob, w);
  CHECK(a.u == b.u);
  CHECK(a.J == b.J);
  CHECK(a.iterations == b.iterations);
  CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("iteration cap reports non-convergence") {
  std::mt19937_64 rng(7);
  const ChargingProblem prob = evening_problem(24, 0.5, rng);
  const PicnnWeights w = toy_network(rng);
  SolveConfig c;
  c.max_iters = 1;
  const Schedule s = solve(prob, w, c);
  CHECK_FALSE(s.converged);
  CHECK(s.iterations == 1);
  CHECK(FeasibleSet(prob.pack, 24).is_feasible(s.u, 1e-8));
}

TEST_CASE("explicit step and warm start") {
  std::mt19937_64 rng(8);
  const ChargingProblem prob = toy_problem(6, 0.5, rng);
  const PicnnWeights w = toy_network(rng);
  const Schedule ref = solve(prob, w);
  SolveConfig c;
  c.step_size = ref.step_size;
  c.backtracking = true;
  const Schedule s = solve(prob, w, c);
  CHECK(s.converged);
  CHECK(s.J == doctest::Approx(ref.J).epsilon(1e-7));
  const Schedule warm = solve(prob, w, {}, std::span<const double>(ref.u));
  CHECK(warm.converged);
  CHECK(warm.iterations <= ref.iterations);
  CHECK(warm.J == doctest::Approx(ref.J).epsilon(1e-7));
}

TEST_CASE("lipschitz estimate bounds the curvature along random directions") {
  std::mt19937_64 rng(9);
  const ChargingProblem prob = toy_problem(5, 0.0, rng);
  const PicnnWeights w = toy_network(rng);
  const ChargingObjective obj(prob, w);
  const FeasibleSet set(prob.pack, 5);
  const double L = estimate_lipschitz(obj, set, initial_point(set), 7);
  CHECK(L > 0.0);
  // Rayleigh quotient of a finite-difference Hessian at the start point
  const Vector u0 = initial_point(set);
  for (int i = 0; i < 20; ++i) {
    Vector d = random_vector(rng, 5, -1, 1);
    const double h = 1e-3;
    Vector a = u0, b = u0;
    for (std::size_t t = 0; t < 5; ++t) {
      a[t] += h * d[t];
      b[t] -= h * d[t];
    }
    const double curv = (obj.value(a) - 2 * obj.value(u0) + obj.value(b)) / (h * h);
    CHECK(curv <= 1.05 * L * dot(d, d) + 1e-9);
  }
}

TEST_CASE("config validation and json") {
  SolveConfig c;
  c.max_iters = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.step_size = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_FALSE(solve_config_from_json({{"step_size", "auto"}}).step_size.has_value());
  CHECK(solve_config_from_json({{"step_size", 0.5}}).step_size == 0.5);
  CHECK_THROWS_AS(solve_config_from_json({{"step_size", "fast"}}), ConfigError);
  CHECK_THROWS_AS(solve_config_from_json({{"stop_tol", 0}}), ConfigError);
  const auto j = to_json(SolveConfig{});
  CHECK(j.at("step_size") == "auto");
  CHECK(solve_config_from_json(j).max_iters == 5000);
}

TEST_CASE("schedule csv layout") {
  Schedule s;
  s.u = {1.5, -2};
  s.energy = {0.5, 0.25};
  s.alpha = {0.1, 0.2};
  std::ostringstream o;
  write_schedule_csv(o, s);
  CHECK(o.str() == "interval,p_kw,energy_pu,alpha\n1,1.5,0.5,0.10000000000000001\n"
                   "2,-2,0.25,0.20000000000000001\n");
}

}  // TEST_SUITE
