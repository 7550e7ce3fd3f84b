#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "v2g/linalg.hpp"
#include "v2g/problem.hpp"

namespace v2g {

struct Violation {
  std::string constraint;  // "power", "energy_lower", "energy_upper", "terminal"
  std::size_t interval = 0;  // 1-based
  double slack = 0.0;        // negative: amount of violation (kW or p.u.)
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<Violation> violations;
};

nlohmann::json to_json(const FeasibilityReport& r);

struct ProjectionOptions {
  double tolerance = 1e-10;   // sup-norm change of the iterate over one sweep [kW]
  std::size_t max_sweeps = 0;  // 0: 100 * T * (number of constraints)
};

struct ProjectionStats {
  std::size_t sweeps = 0;
  double last_change = 0.0;
  double max_violation = 0.0;
};

/// The set of admissible schedules u in R^T (kW per interval):
///   -p_max <= u_t <= p_max
///   e_lo <= e0 + k * sum_{j<=t} u_j <= e_hi          for every t
///   |e_des - (e0 + k * sum_{j<=T} u_j)| <= epsilon
/// with k = eta * dt / capacity (p.u. per kW-interval). Immutable.
class FeasibleSet {
 public:
  /// Throws InfeasibleError with a reachability explanation when the set is
  /// empty.
  FeasibleSet(const PackParams& pack, std::size_t horizon);

  std::size_t horizon() const { return lo_.size(); }
  const PackParams& pack() const { return pack_; }
  std::size_t constraint_count() const { return 4 * horizon() + 2; }

  /// State of energy E_1..E_T [p.u.].
  Vector energy_trajectory(std::span<const double> u) const;

  FeasibilityReport check(std::span<const double> u, double tol) const;
  bool is_feasible(std::span<const double> u, double tol) const {
    return check(u, tol).feasible;
  }

  /// Euclidean projection onto the set by Dykstra's method over the power box
  /// and the T cumulative-energy slabs (the terminal band folded into slab T).
  /// Throws ConvergenceError when max_sweeps is exhausted.
  Vector project(std::span<const double> v, const ProjectionOptions& opt = {},
                 ProjectionStats* stats = nullptr) const;

  /// Cumulative-sum bounds lo_t <= sum_{j<=t} u_j <= hi_t in kW-intervals.
  std::span<const double> cumulative_lower() const { return lo_; }
  std::span<const double> cumulative_upper() const { return hi_; }

 private:
  double max_violation(std::span<const double> u) const;

  PackParams pack_;
  Vector lo_;
  Vector hi_;
};

}  // namespace v2g
