#include "v2g/feasible_set.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "v2g/error.hpp"

namespace v2g {

nlohmann::json to_json(const FeasibilityReport& r) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& x : r.violations)
    v.push_back({{"constraint", x.constraint}, {"interval", x.interval}, {"slack", x.slack}});
  return {{"feasible", r.feasible}, {"violations", std::move(v)}};
}

FeasibleSet::FeasibleSet(const PackParams& pack, std::size_t horizon) : pack_(pack) {
  pack_.validate();
  if (horizon == 0) throw ConfigError("feasible set: horizon must be >= 1");
  const double k = pack_.energy_per_kw();
  const double step = k * pack_.p_max;  // p.u. per interval at full power

  // Reachable energy after t intervals is an interval [a_t, b_t].
  double a = pack_.e0;
  double b = pack_.e0;
  for (std::size_t t = 1; t <= horizon; ++t) {
    a = std::max(pack_.e_lo, a - step);
    b = std::min(pack_.e_hi, b + step);
    if (a > b) {
      if (pack_.e0 < pack_.e_lo)
        throw InfeasibleError(fmt::format(
            "cannot raise e0 = {} above e_lo = {} by interval {} at p_max = {} kW", pack_.e0,
            pack_.e_lo, t, pack_.p_max));
      throw InfeasibleError(fmt::format(
          "cannot bring e0 = {} below e_hi = {} by interval {} at p_max = {} kW", pack_.e0,
          pack_.e_hi, t, pack_.p_max));
    }
  }
  const double band_lo = pack_.e_des - pack_.epsilon;
  const double band_hi = pack_.e_des + pack_.epsilon;
  if (b < band_lo)
    throw InfeasibleError(fmt::format(
        "cannot reach e_des - epsilon = {} from e0 = {} in {} steps at p_max = {} kW "
        "(at most {} p.u. reachable)",
        band_lo, pack_.e0, horizon, pack_.p_max, b));
  if (a > band_hi)
    throw InfeasibleError(fmt::format(
        "cannot come down to e_des + epsilon = {} from e0 = {} in {} steps at p_max = {} kW "
        "(at least {} p.u. remain)",
        band_hi, pack_.e0, horizon, pack_.p_max, a));

  lo_.assign(horizon, (pack_.e_lo - pack_.e0) / k);
  hi_.assign(horizon, (pack_.e_hi - pack_.e0) / k);
  lo_.back() = std::max(lo_.back(), (band_lo - pack_.e0) / k);
  hi_.back() = std::min(hi_.back(), (band_hi - pack_.e0) / k);
}

Vector FeasibleSet::energy_trajectory(std::span<const double> u) const {
  if (u.size() != horizon())
    throw DimensionError(fmt::format("schedule has {} entries, horizon is {}", u.size(), horizon()));
  const double k = pack_.energy_per_kw();
  Vector e(u.size());
  double s = 0.0;
  for (std::size_t t = 0; t < u.size(); ++t) {
    s += u[t];
    e[t] = pack_.e0 + k * s;
  }
  return e;
}

FeasibilityReport FeasibleSet::check(std::span<const double> u, double tol) const {
  const Vector e = energy_trajectory(u);
  FeasibilityReport rep;
  auto add = [&](const char* name, std::size_t t, double slack) {
    if (slack < -tol) rep.violations.push_back({name, t, slack});
  };
  for (std::size_t t = 0; t < u.size(); ++t) {
    add("power", t + 1, pack_.p_max - std::abs(u[t]));
    add("energy_lower", t + 1, e[t] - pack_.e_lo);
    add("energy_upper", t + 1, pack_.e_hi - e[t]);
  }
  add("terminal", u.size(), pack_.epsilon - std::abs(pack_.e_des - e.back()));
  rep.feasible = rep.violations.empty();
  return rep;
}

double FeasibleSet::max_violation(std::span<const double> u) const {
  double worst = 0.0;
  double s = 0.0;
  for (std::size_t t = 0; t < u.size(); ++t) {
    worst = std::max(worst, std::abs(u[t]) - pack_.p_max);
    s += u[t];
    worst = std::max({worst, lo_[t] - s, s - hi_[t]});
  }
  return worst;
}

Vector FeasibleSet::project(std::span<const double> v, const ProjectionOptions& opt,
                            ProjectionStats* stats) const {
  const std::size_t n = horizon();
  if (v.size() != n)
    throw DimensionError(fmt::format("project: input has {} entries, horizon is {}", v.size(), n));
  const std::size_t max_sweeps =
      opt.max_sweeps > 0 ? opt.max_sweeps : 100 * n * constraint_count();
  const double p_max = pack_.p_max;

  Vector x(v.begin(), v.end());
  Vector box_corr(n, 0.0);   // Dykstra increment of the power box
  Vector slab_corr(n, 0.0);  // increment of slab t is slab_corr[t] * 1_{j<=t}
  Vector delta(n, 0.0);
  Vector x_prev(n);

  // Every slab normal is an indicator 1_{j<=t}, so both the increment and the
  // projection step are scalar multiples of it. Processing slabs from t = T
  // down to 1 lets each partial sum be corrected lazily, O(T) per sweep.
  ProjectionStats st;
  for (st.sweeps = 1; st.sweeps <= max_sweeps; ++st.sweeps) {
    x_prev = x;
    double corr_change = 0.0;
    double prefix_total = 0.0;
    for (double xj : x) prefix_total += xj;
    double prefix = prefix_total;  // sum of x_1..x_t before slab shifts
    double shift = 0.0;            // sum of shifts applied by slabs t' > t
    for (std::size_t t = n; t-- > 0;) {
      const double width = static_cast<double>(t + 1);
      const double s_z = prefix + width * shift + width * slab_corr[t];
      const double s_p = std::clamp(s_z, lo_[t], hi_[t]);
      const double corr = (s_z - s_p) / width;
      delta[t] = slab_corr[t] - corr;
      slab_corr[t] = corr;
      shift += delta[t];
      prefix -= x[t];
      corr_change = std::max(corr_change, std::abs(delta[t]));
    }
    double acc = 0.0;
    for (std::size_t j = n; j-- > 0;) {
      acc += delta[j];
      x[j] += acc;
    }
    for (std::size_t j = 0; j < n; ++j) {
      const double z = x[j] + box_corr[j];
      const double p = std::clamp(z, -p_max, p_max);
      corr_change = std::max(corr_change, std::abs(z - p - box_corr[j]));
      box_corr[j] = z - p;
      x[j] = p;
    }
    // The iterate can sit still for many sweeps while the increments are
    // still moving, so both must settle.
    double change = corr_change;
    for (std::size_t j = 0; j < n; ++j) change = std::max(change, std::abs(x[j] - x_prev[j]));
    st.last_change = change;
    if (change <= opt.tolerance) {
      st.max_violation = max_violation(x);
      if (st.max_violation <= opt.tolerance) {
        if (stats) *stats = st;
        return x;
      }
    }
  }
  st.sweeps = max_sweeps;
  st.max_violation = max_violation(x);
  if (stats) *stats = st;
  throw ConvergenceError(
      fmt::format("projection did not converge in {} sweeps (change {:.3g}, violation {:.3g})",
                  max_sweeps, st.last_change, st.max_violation),
      std::max(st.last_change, st.max_violation));
}

}  // namespace v2g
