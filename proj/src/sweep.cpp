#include "v2g/sweep.hpp"

#include <algorithm>
#include <ostream>

#include <fmt/format.h>

#include "v2g/data.hpp"
#include "v2g/error.hpp"

namespace v2g {

std::vector<double> default_rho_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

std::vector<TradeoffPoint> sweep(const ChargingProblem& problem, const PicnnWeights& weights,
                                 std::span<const double> rhos, const SolveConfig& config,
                                 bool warm_start) {
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    if (!(rhos[i] >= 0.0 && rhos[i] <= 1.0))
      throw ConfigError(fmt::format("sweep: rho[{}] = {} outside [0, 1]", i, rhos[i]));
    if (i > 0 && rhos[i] < rhos[i - 1])
      throw ConfigError("sweep: rho values must be sorted ascending");
  }

  std::vector<TradeoffPoint> out;
  out.reserve(rhos.size());
  Vector previous;
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    if (i > 0 && rhos[i] == rhos[i - 1]) {
      out.push_back(out.back());
      continue;
    }
    TradeoffPoint pt;
    pt.rho = rhos[i];
    ChargingProblem p = problem;
    p.rho = rhos[i];
    try {
      const Schedule s =
          warm_start && !previous.empty()
              ? solve(p, weights, config, std::span<const double>(previous))
              : solve(p, weights, config);
      pt.theta1 = s.theta1;
      pt.theta2 = s.theta2;
      pt.J = s.J;
      pt.converged = s.converged;
      pt.iterations = s.iterations;
      previous = s.u;
    } catch (const Error& e) {
      pt.error = e.what();
    }
    out.push_back(std::move(pt));
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> dominated_pairs(
    std::span<const TradeoffPoint> points, double tol) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t j = 0; j < points.size(); ++j) {
      const auto& a = points[i];
      const auto& b = points[j];
      if (!a.error.empty() || !b.error.empty()) continue;
      const bool no_worse = a.theta1 <= b.theta1 + tol && a.theta2 <= b.theta2 + tol;
      const bool better = a.theta1 < b.theta1 - tol || a.theta2 < b.theta2 - tol;
      if (i != j && no_worse && better) out.emplace_back(i, j);
    }
  return out;
}

void write_tradeoff_csv(std::ostream& out, std::span<const TradeoffPoint> points) {
  out << "rho,theta1_eur,theta2_eur,J_eur\n";
  for (const auto& p : points)
    out << format_double(p.rho) << ',' << format_double(p.theta1) << ','
        << format_double(p.theta2) << ',' << format_double(p.J) << '\n';
}

nlohmann::json to_json(const TradeoffPoint& p) {
  nlohmann::json j = {{"rho", p.rho},         {"theta1_eur", p.theta1},
                      {"theta2_eur", p.theta2}, {"J_eur", p.J},
                      {"converged", p.converged}, {"iterations", p.iterations}};
  if (!p.error.empty()) j["error"] = p.error;
  return j;
}

}  // namespace v2g
