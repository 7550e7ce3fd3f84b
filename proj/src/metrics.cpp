#include "v2g/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "v2g/error.hpp"

namespace v2g {

double r_squared(std::span<const double> predictions, std::span<const double> truth) {
  if (predictions.size() != truth.size())
    throw DataError(fmt::format("r_squared: {} predictions vs {} targets",
                                predictions.size(), truth.size()));
  if (truth.size() < 2) throw DataError("r_squared: need at least two samples");
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double r = truth[i] - predictions[i];
    const double d = truth[i] - mean;
    ss_res += r * r;
    ss_tot += d * d;
  }
  if (!(ss_tot > 0.0)) throw DataError("r_squared: truth values are all identical");
  return 1.0 - ss_res / ss_tot;
}

FitReport fit_report(std::span<const double> predictions, std::span<const double> truth) {
  FitReport rep;
  rep.r2 = r_squared(predictions, truth);
  rep.n_samples = truth.size();
  double sq = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = predictions[i] - truth[i];
    sq += e * e;
    rep.max_abs_error = std::max(rep.max_abs_error, std::abs(e));
  }
  rep.rmse = std::sqrt(sq / static_cast<double>(truth.size()));
  return rep;
}

nlohmann::json to_json(const FitReport& r) {
  return {{"r2", r.r2},
          {"rmse", r.rmse},
          {"max_abs_error", r.max_abs_error},
          {"n_samples", r.n_samples}};
}

}  // namespace v2g
