#pragma once

#include <cstddef>
#include <filesystem>
#include <span>

#include <nlohmann/json.hpp>

#include "v2g/linalg.hpp"

namespace v2g {

/// Effective capacity cost: what a new pack costs minus what it resells for
/// once it has faded to end of life, spread over the usable fade.
struct BatteryCost {
  double new_eur_per_kwh = 207.0;
  double resale_eur_per_kwh = 45.0;
  double end_of_life_fade = 0.3;

  /// (new - (1 - fade) * resale) / fade; 585 EUR/kWh for the defaults.
  double effective_gamma() const;
};

/// Pack, charger and session parameters. Energies are per-unit of
/// capacity_kwh, power in kW, dt in hours, gamma in EUR/kWh.
struct PackParams {
  double capacity_kwh = 50.0;
  int n_series = 83;
  int n_parallel = 94;
  double v_bat = 350.0;
  double gamma = 585.0;
  double eta_avg = 0.95;
  double e0 = 0.4;
  double e_lo = 0.2;
  double e_hi = 0.9;
  double e_des = 0.7;
  double epsilon = 0.02;
  double p_max = 22.0;
  double dt = 0.25;

  /// Throws ConfigError describing the first violated invariant.
  void validate() const;

  double cell_voltage() const { return v_bat / n_series; }
  /// EUR per Ah of single-cell capacity loss:
  /// gamma * n_series * n_parallel * V_cell / 1000 = gamma * n_parallel * v_bat / 1000.
  double zeta() const;
  /// p.u. energy change per kW held for one interval: eta * dt / capacity.
  double energy_per_kw() const { return eta_avg * dt / capacity_kwh; }
};

/// One smart-charging session: pack, tariff alpha [EUR/kWh] and cell
/// temperature forecast [degC] per interval, and the user weight rho.
struct ChargingProblem {
  PackParams pack;
  Vector alpha;
  Vector temp_c;
  double rho = 0.5;
  double battery_age_h = 1000.0;

  std::size_t horizon() const { return alpha.size(); }
  /// Battery age at each interval midpoint: age + (i + 1/2) * dt.
  Vector horizon_times() const;
  void validate() const;
};

nlohmann::json to_json(const PackParams& p);
/// Reads PackParams fields; a "battery_cost" object, when present and no
/// explicit "gamma" is given, sets gamma to its effective_gamma().
PackParams pack_params_from_json(const nlohmann::json& j);

/// Two-column CSV "interval_index,value"; indices must run 0..n-1 or 1..n.
Vector load_series_csv(const std::filesystem::path& path);

}  // namespace v2g
