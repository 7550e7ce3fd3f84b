#include "v2g/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include <fmt/format.h>

#include "v2g/error.hpp"

namespace v2g {

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0)) throw ConfigError("train: initial_lr must be > 0");
  if (!(lr_decay >= 0.0)) throw ConfigError("train: lr_decay must be >= 0");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("train: validation_fraction must be in (0, 1)");
}

double TrainConfig::learning_rate(std::size_t epoch) const {
  return initial_lr / (1.0 + lr_decay * static_cast<double>(epoch));
}

double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.empty()) throw DataError("mse_loss: empty input");
  if (predictions.size() != targets.size())
    throw DataError(fmt::format("mse_loss: {} predictions vs {} targets", predictions.size(),
                                targets.size()));
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    acc += d * d;
  }
  return acc / static_cast<double>(predictions.size());
}

AdamState AdamState::for_weights(const PicnnWeights& w) {
  AdamState s;
  const std::size_t n = parameter_count(w);
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

void adam_step(PicnnWeights& weights, const PicnnWeights& grads, AdamState& state, double lr,
               std::size_t batch_index, const AdamParams& params) {
  std::vector<std::span<double>> w_tensors;
  std::vector<std::span<const double>> g_tensors;
  for_each_tensor(weights, [&](std::string_view, std::size_t, std::span<double> v, bool) {
    w_tensors.push_back(v);
  });
  for_each_tensor(grads, [&](std::string_view, std::size_t, std::span<const double> v, bool) {
    g_tensors.push_back(v);
  });
  std::size_t n = 0;
  for (std::size_t t = 0; t < w_tensors.size(); ++t) {
    if (t >= g_tensors.size() || g_tensors[t].size() != w_tensors[t].size())
      throw DimensionError("adam_step: gradient shapes do not match weights");
    for (double g : g_tensors[t])
      if (!std::isfinite(g))
        throw NumericError(fmt::format("adam_step: non-finite gradient in batch {}", batch_index));
    n += w_tensors[t].size();
  }
  if (g_tensors.size() != w_tensors.size() || state.m.size() != n || state.v.size() != n)
    throw DimensionError("adam_step: optimizer state does not match weights");

  ++state.step;
  const double bc1 = 1.0 - std::pow(params.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(params.beta2, static_cast<double>(state.step));
  std::size_t k = 0;
  for (std::size_t t = 0; t < w_tensors.size(); ++t) {
    auto w = w_tensors[t];
    auto g = g_tensors[t];
    for (std::size_t i = 0; i < w.size(); ++i, ++k) {
      state.m[k] = params.beta1 * state.m[k] + (1.0 - params.beta1) * g[i];
      state.v[k] = params.beta2 * state.v[k] + (1.0 - params.beta2) * g[i] * g[i];
      const double m_hat = state.m[k] / bc1;
      const double v_hat = state.v[k] / bc2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + params.epsilon);
    }
  }
  enforce_convexity_inplace(weights);
}

DatasetSplit split_dataset(std::span<const DegradationSample> samples,
                           const TrainConfig& config) {
  DatasetSplit split;
  const bool has_cell =
      !config.validation_cell.empty() &&
      std::any_of(samples.begin(), samples.end(),
                  [&](const auto& s) { return s.cell_id == config.validation_cell; });
  if (has_cell) {
    for (const auto& s : samples)
      (s.cell_id == config.validation_cell ? split.validation : split.train).push_back(s);
    split.description = fmt::format("hold-out cell {}", config.validation_cell);
  } else {
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::size_t>(
        std::llround(config.validation_fraction * static_cast<double>(samples.size())));
    std::vector<bool> is_val(samples.size(), false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[idx[i]] = true;
    for (std::size_t i = 0; i < samples.size(); ++i)
      (is_val[i] ? split.validation : split.train).push_back(samples[i]);
    split.description = fmt::format("seeded row split, {:.0f}% validation",
                                    100.0 * config.validation_fraction);
  }
  return split;
}

PicnnScaling fit_scaling(std::span<const DegradationSample> train) {
  if (train.empty()) throw DataError("fit_scaling: empty training set");
  const auto n = static_cast<double>(train.size());
  auto mean_std = [&](auto get) {
    double mean = 0.0;
    for (const auto& s : train) mean += get(s);
    mean /= n;
    double var = 0.0;
    for (const auto& s : train) var += (get(s) - mean) * (get(s) - mean);
    const double sd = std::sqrt(var / n);
    return std::pair{mean, sd > 1e-12 ? sd : 1.0};
  };
  PicnnScaling sc = PicnnScaling::identity(2, 1);
  std::tie(sc.x_shift[0], sc.x_scale[0]) = mean_std([](const auto& s) { return s.elapsed_h; });
  std::tie(sc.x_shift[1], sc.x_scale[1]) = mean_std([](const auto& s) { return s.temp_c; });
  double sq = 0.0;
  for (const auto& s : train) sq += s.c_rate * s.c_rate;
  const double rms = std::sqrt(sq / n);
  sc.y_scale[0] = rms > 1e-12 ? rms : 1.0;
  double lo = train.front().q_loss_ah;
  for (const auto& s : train) lo = std::min(lo, s.q_loss_ah);
  // The softplus output only approaches zero asymptotically; leave it one
  // unit of headroom below the smallest target.
  sc.out_scale = mean_std([](const auto& s) { return s.q_loss_ah; }).second;
  sc.out_shift = lo - sc.out_scale;
  return sc;
}

std::vector<double> predict(const PicnnWeights& w, std::span<const DegradationSample> samples) {
  PicnnTape tape;
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const double x[2] = {s.elapsed_h, s.temp_c};
    const double y[1] = {s.c_rate};
    out.push_back(tape.forward(w, x, y));
  }
  return out;
}

namespace {

double dataset_mse(const PicnnWeights& w, std::span<const DegradationSample> samples) {
  const auto pred = predict(w, samples);
  std::vector<double> target;
  target.reserve(samples.size());
  for (const auto& s : samples) target.push_back(s.q_loss_ah);
  return mse_loss(pred, target);
}

}  // namespace

TrainResult train_split(const DatasetSplit& split, const PicnnArch& arch,
                        const TrainConfig& config) {
  config.validate();
  arch.validate();
  if (arch.n_x != 2 || arch.n_y != 1)
    throw ConfigError("train: degradation samples need n_x = 2 and n_y = 1");
  if (split.train.empty() || split.validation.empty())
    throw DataError("train: training and validation splits must be non-empty");

  const auto t_start = std::chrono::steady_clock::now();
  TrainResult result;
  auto& w = result.weights;
  w = init_picnn(arch, config.seed);
  w.scaling = fit_scaling(split.train);
  const double out_scale = w.scaling.out_scale;

  AdamState state = AdamState::for_weights(w);
  PicnnWeights grad = zeros_like(w);
  PicnnTape tape;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(split.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t batch_counter = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.learning_rate(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    try {
      for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
        const std::size_t end = std::min(order.size(), begin + config.batch_size);
        const auto batch = static_cast<double>(end - begin);
        for_each_tensor(grad, [](std::string_view, std::size_t, std::span<double> v, bool) {
          std::fill(v.begin(), v.end(), 0.0);
        });
        for (std::size_t b = begin; b < end; ++b) {
          const auto& s = split.train[order[b]];
          const double x[2] = {s.elapsed_h, s.temp_c};
          const double y[1] = {s.c_rate};
          const double pred = tape.forward(w, x, y);
          const double r = (pred - s.q_loss_ah) / out_scale;
          tape.backward(w, 2.0 * r / (out_scale * batch), &grad, {}, {});
        }
        adam_step(w, grad, state, lr, batch_counter++);
        if (!w.satisfies_convexity())
          throw Error("train: convexity projection failed after Adam step");
      }
    } catch (const NumericError& e) {
      throw DivergenceError(fmt::format("epoch {}: {}", epoch + 1, e.what()), epoch + 1);
    }
    double train_mse = 0.0;
    double val_mse = 0.0;
    try {
      train_mse = dataset_mse(w, split.train);
      val_mse = dataset_mse(w, split.validation);
    } catch (const NumericError& e) {
      throw DivergenceError(fmt::format("epoch {}: {}", epoch + 1, e.what()), epoch + 1);
    }
    if (!std::isfinite(train_mse) || !std::isfinite(val_mse))
      throw DivergenceError(fmt::format("epoch {}: loss is not finite", epoch + 1), epoch + 1);
    result.report.train_mse.push_back(train_mse);
    result.report.val_mse.push_back(val_mse);
  }

  result.report.split = split.description;
  result.report.n_train = split.train.size();
  result.report.n_validation = split.validation.size();
  result.report.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

TrainResult train(std::span<const DegradationSample> samples, const PicnnArch& arch,
                  const TrainConfig& config) {
  config.validate();
  return train_split(split_dataset(samples, config), arch, config);
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"initial_lr", c.initial_lr},
          {"lr_decay", c.lr_decay},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"validation_cell", c.validation_cell},
          {"validation_fraction", c.validation_fraction}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.initial_lr = j.value("initial_lr", c.initial_lr);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.validation_cell = j.value("validation_cell", c.validation_cell);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("train config: {}", e.what()));
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const TrainReport& r) {
  return {{"train_mse", r.train_mse},     {"val_mse", r.val_mse},
          {"wall_clock_s", r.wall_clock_s}, {"split", r.split},
          {"n_train", r.n_train},         {"n_validation", r.n_validation}};
}

void write_loss_csv(std::ostream& out, const TrainReport& r) {
  out << "epoch,train_mse,val_mse\n";
  for (std::size_t e = 0; e < r.train_mse.size(); ++e)
    out << e + 1 << ',' << format_double(r.train_mse[e]) << ',' << format_double(r.val_mse[e])
        << '\n';
}

}  // namespace v2g
