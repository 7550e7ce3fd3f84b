#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "v2g/data.hpp"
#include "v2g/icnn.hpp"

namespace v2g {

struct TrainConfig {
  double initial_lr = 0.04;
  double lr_decay = 0.1;  // lr(epoch) = initial_lr / (1 + lr_decay * epoch)
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  std::uint64_t seed = 42;
  // Whole-cell hold-out when any sample carries this id; otherwise a seeded
  // row split with validation_fraction of the rows held out.
  std::string validation_cell = "RW10";
  double validation_fraction = 0.2;

  void validate() const;
  double learning_rate(std::size_t epoch) const;
};

struct TrainReport {
  std::vector<double> train_mse;  // per epoch, original target units
  std::vector<double> val_mse;
  double wall_clock_s = 0.0;
  std::string split;  // human-readable description of the split
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
};

struct TrainResult {
  PicnnWeights weights;
  TrainReport report;
};

/// (1/n) * sum (pred - target)^2. Throws DataError on empty or mismatched input.
double mse_loss(std::span<const double> predictions, std::span<const double> targets);

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moments in for_each_tensor order.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t step = 0;

  static AdamState for_weights(const PicnnWeights& w);
};

/// One bias-corrected Adam update followed by the convexity projection
/// (W_z clamped at zero). Throws NumericError naming batch_index when a
/// gradient entry is not finite; weights are untouched in that case.
void adam_step(PicnnWeights& weights, const PicnnWeights& grads, AdamState& state,
               double lr, std::size_t batch_index = 0, const AdamParams& params = {});

struct DatasetSplit {
  std::vector<DegradationSample> train;
  std::vector<DegradationSample> validation;
  std::string description;
};

DatasetSplit split_dataset(std::span<const DegradationSample> samples,
                           const TrainConfig& config);

/// Input/output scaling fitted on the training rows: x standardized, y
/// divided by its RMS, output = min(target) + std(target) * z_k.
PicnnScaling fit_scaling(std::span<const DegradationSample> train);

/// Mini-batch projected Adam on the MSE of standardized residuals. The
/// result is bit-reproducible for a fixed seed and dataset.
TrainResult train(std::span<const DegradationSample> samples, const PicnnArch& arch,
                  const TrainConfig& config);

TrainResult train_split(const DatasetSplit& split, const PicnnArch& arch,
                        const TrainConfig& config);

std::vector<double> predict(const PicnnWeights& w,
                            std::span<const DegradationSample> samples);

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainReport& r);
void write_loss_csv(std::ostream& out, const TrainReport& r);

}  // namespace v2g
