#include "v2g/problem.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include <fmt/format.h>

#include "v2g/error.hpp"

namespace v2g {

double BatteryCost::effective_gamma() const {
  if (!(end_of_life_fade > 0.0 && end_of_life_fade <= 1.0))
    throw ConfigError("battery_cost.end_of_life_fade must be in (0, 1]");
  return (new_eur_per_kwh - (1.0 - end_of_life_fade) * resale_eur_per_kwh) / end_of_life_fade;
}

void PackParams::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("pack: " + msg); };
  if (!(capacity_kwh > 0)) fail("capacity_kwh must be > 0");
  if (n_series < 1 || n_parallel < 1) fail("n_series and n_parallel must be >= 1");
  if (!(v_bat > 0)) fail("v_bat must be > 0");
  if (!(gamma > 0)) fail("gamma must be > 0");
  if (!(eta_avg > 0 && eta_avg <= 1)) fail("eta_avg must be in (0, 1]");
  if (!(e0 >= 0 && e0 <= 1)) fail("e0 must be in [0, 1]");
  if (!(0 <= e_lo && e_lo < e_des && e_des <= e_hi && e_hi <= 1))
    fail("need 0 <= e_lo < e_des <= e_hi <= 1");
  if (!(epsilon > 0)) fail("epsilon must be > 0");
  if (!(p_max > 0)) fail("p_max must be > 0");
  if (!(dt > 0)) fail("dt must be > 0");
}

double PackParams::zeta() const {
  return gamma * n_series * n_parallel * cell_voltage() / 1000.0;
}

Vector ChargingProblem::horizon_times() const {
  Vector t(horizon());
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = battery_age_h + (static_cast<double>(i) + 0.5) * pack.dt;
  return t;
}

void ChargingProblem::validate() const {
  pack.validate();
  if (alpha.empty()) throw ConfigError("problem: tariff is empty");
  if (temp_c.size() != alpha.size())
    throw DimensionError(fmt::format("problem: {} tariff entries vs {} temperature entries",
                                     alpha.size(), temp_c.size()));
  for (double a : alpha)
    if (!std::isfinite(a)) throw ConfigError("problem: tariff has a non-finite entry");
  for (double t : temp_c)
    if (!(t > -40.0 && t < 100.0))
      throw ConfigError(fmt::format("problem: temperature {} outside (-40, 100)", t));
  if (!(rho >= 0.0 && rho <= 1.0))
    throw ConfigError(fmt::format("problem: rho = {} outside [0, 1]", rho));
  if (!(battery_age_h >= 0.0)) throw ConfigError("problem: battery_age_h must be >= 0");
}

nlohmann::json to_json(const PackParams& p) {
  return {{"capacity_kwh", p.capacity_kwh}, {"n_series", p.n_series},
          {"n_parallel", p.n_parallel},     {"v_bat", p.v_bat},
          {"gamma", p.gamma},               {"eta_avg", p.eta_avg},
          {"e0", p.e0},                     {"e_lo", p.e_lo},
          {"e_hi", p.e_hi},                 {"e_des", p.e_des},
          {"epsilon", p.epsilon},           {"p_max", p.p_max},
          {"dt", p.dt}};
}

PackParams pack_params_from_json(const nlohmann::json& j) {
  PackParams p;
  try {
    p.capacity_kwh = j.value("capacity_kwh", p.capacity_kwh);
    p.n_series = j.value("n_series", p.n_series);
    p.n_parallel = j.value("n_parallel", p.n_parallel);
    p.v_bat = j.value("v_bat", p.v_bat);
    p.eta_avg = j.value("eta_avg", p.eta_avg);
    p.e0 = j.value("e0", p.e0);
    p.e_lo = j.value("e_lo", p.e_lo);
    p.e_hi = j.value("e_hi", p.e_hi);
    p.e_des = j.value("e_des", p.e_des);
    p.epsilon = j.value("epsilon", p.epsilon);
    p.p_max = j.value("p_max", p.p_max);
    p.dt = j.value("dt", p.dt);
    if (j.contains("gamma")) {
      p.gamma = j.at("gamma").get<double>();
    } else if (j.contains("battery_cost")) {
      const auto& c = j.at("battery_cost");
      BatteryCost cost;
      cost.new_eur_per_kwh = c.value("new_eur_per_kwh", cost.new_eur_per_kwh);
      cost.resale_eur_per_kwh = c.value("resale_eur_per_kwh", cost.resale_eur_per_kwh);
      cost.end_of_life_fade = c.value("end_of_life_fade", cost.end_of_life_fade);
      p.gamma = cost.effective_gamma();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("pack: {}", e.what()));
  }
  p.validate();
  return p;
}

Vector load_series_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  Vector values;
  std::size_t lineno = 0;
  long first_index = -1;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError(fmt::format("{}:{}: expected 'interval_index,value'", path.string(), lineno));
    const std::string_view idx_s(line.data(), comma);
    const std::string_view val_s(line.data() + comma + 1, line.size() - comma - 1);
    long idx = 0;
    double val = 0.0;
    const auto r1 = std::from_chars(idx_s.data(), idx_s.data() + idx_s.size(), idx);
    const auto r2 = std::from_chars(val_s.data(), val_s.data() + val_s.size(), val);
    const bool ok = r1.ec == std::errc() && r1.ptr == idx_s.data() + idx_s.size() &&
                    r2.ec == std::errc() && r2.ptr == val_s.data() + val_s.size();
    if (!ok) {
      if (values.empty() && first_index < 0 && lineno == 1) continue;  // header row
      throw DataError(fmt::format("{}:{}: malformed row '{}'", path.string(), lineno, line));
    }
    if (first_index < 0) {
      if (idx != 0 && idx != 1)
        throw DataError(fmt::format("{}:{}: indices must start at 0 or 1", path.string(), lineno));
      first_index = idx;
    }
    if (idx != first_index + static_cast<long>(values.size()))
      throw DataError(fmt::format("{}:{}: interval index {} out of sequence", path.string(),
                                  lineno, idx));
    if (!std::isfinite(val))
      throw DataError(fmt::format("{}:{}: value is not finite", path.string(), lineno));
    values.push_back(val);
  }
  return values;
}

}  // namespace v2g
