#pragma once

#include <cstddef>
#include <span>

#include <nlohmann/json.hpp>

namespace v2g {

struct FitReport {
  double r2 = 0.0;
  double rmse = 0.0;
  double max_abs_error = 0.0;
  std::size_t n_samples = 0;
};

/// Coefficient of determination 1 - SS_res / SS_tot. Throws DataError when
/// lengths differ, fewer than two samples are given, or the truth is constant.
double r_squared(std::span<const double> predictions, std::span<const double> truth);

FitReport fit_report(std::span<const double> predictions, std::span<const double> truth);

nlohmann::json to_json(const FitReport& r);

}  // namespace v2g
