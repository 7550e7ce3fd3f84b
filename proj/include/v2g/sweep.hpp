#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "v2g/optimizer.hpp"

namespace v2g {

struct TradeoffPoint {
  double rho = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double J = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::string error;  // non-empty when the solve for this rho threw
};

/// 0, 0.1, ..., 1.0
std::vector<double> default_rho_grid();

/// One solve per rho, in input order. With warm_start each solve starts from
/// the previous schedule; a repeated rho reuses the previous point. Errors
/// from a single solve are recorded on that point and the sweep continues.
std::vector<TradeoffPoint> sweep(const ChargingProblem& problem, const PicnnWeights& weights,
                                 std::span<const double> rhos, const SolveConfig& config = {},
                                 bool warm_start = true);

/// Indices (i, j) where point j is dominated by point i beyond tol. Points
/// that carry an error are ignored.
std::vector<std::pair<std::size_t, std::size_t>> dominated_pairs(
    std::span<const TradeoffPoint> points, double tol);

void write_tradeoff_csv(std::ostream& out, std::span<const TradeoffPoint> points);
nlohmann::json to_json(const TradeoffPoint& p);

}  // namespace v2g
