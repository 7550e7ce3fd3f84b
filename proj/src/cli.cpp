#include "v2g/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "v2g/data.hpp"
#include "v2g/error.hpp"
#include "v2g/feasible_set.hpp"
#include "v2g/icnn_io.hpp"
#include "v2g/metrics.hpp"
#include "v2g/optimizer.hpp"
#include "v2g/problem.hpp"
#include "v2g/sweep.hpp"
#include "v2g/training.hpp"

namespace v2g {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 42;

struct Overrides {
  std::string config;
  std::string output_dir;
  std::uint64_t seed = 0;
  bool has_seed = false;
  double rho = 0.0;
  bool has_rho = false;
  bool strict = false;
};

struct Run {
  std::string command;
  fs::path base;  // directory of the config file
  json config;    // effective config, overrides applied, without output_dir
  fs::path out_dir;
  std::uint64_t seed = kDefaultSeed;
  std::vector<std::string> outputs;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
};

json read_json_file(const fs::path& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("{}: cannot open '{}'", what, path.string()));
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("{}: '{}' is not valid JSON: {}", what, path.string(), e.what()));
  }
}

const json& require(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw ConfigError(fmt::format("{}: missing field '{}'", where, key));
  return obj.at(key);
}

json object_or_empty(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) return json::object();
  if (!obj.at(key).is_object())
    throw ConfigError(fmt::format("{}: field '{}' must be an object", where, key));
  return obj.at(key);
}

// A path field, resolved against the config file's directory; it must exist.
fs::path input_path(const Run& run, const json& obj, const std::string& key,
                    const std::string& field) {
  if (!obj.is_object() || !obj.contains(key))
    throw ConfigError(fmt::format("missing field '{}'", field));
  if (!obj.at(key).is_string())
    throw ConfigError(fmt::format("field '{}' must be a path string", field));
  fs::path p = obj.at(key).get<std::string>();
  if (p.is_relative()) p = run.base / p;
  if (!fs::exists(p))
    throw ConfigError(fmt::format("field '{}': file not found: {}", field, p.string()));
  return p;
}

template <class Writer>
void write_file(Run& run, const std::string& name, Writer&& writer) {
  const fs::path p = run.out_dir / name;
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error(fmt::format("cannot write '{}'", p.string()));
  writer(f);
  f.flush();
  if (!f) throw Error(fmt::format("write to '{}' failed", p.string()));
  run.outputs.push_back(name);
}

void write_json(Run& run, const std::string& name, const json& j) {
  write_file(run, name, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

void write_manifest(Run& run) {
  const std::string canonical = run.config.dump();
  json m = {{"tool", "v2g"},
            {"version", std::string(kVersion)},
            {"command", run.command},
            {"config_hash", fmt::format("fnv1a64:{:016x}", fnv1a64(canonical))},
            {"seed", run.seed},
            {"config", run.config},
            {"outputs", run.outputs},
            {"libraries",
             {{"fmt", FMT_VERSION},
              {"nlohmann_json", fmt::format("{}.{}.{}", NLOHMANN_JSON_VERSION_MAJOR,
                                            NLOHMANN_JSON_VERSION_MINOR,
                                            NLOHMANN_JSON_VERSION_PATCH)}}},
            {"compiler", __VERSION__}};
  write_json(run, "manifest.json", m);
}

Run start_run(const std::string& command, const Overrides& ov, std::ostream& out,
              std::ostream& err) {
  Run run;
  run.command = command;
  run.out = &out;
  run.err = &err;
  const fs::path cfg_path = ov.config;
  if (!fs::exists(cfg_path))
    throw ConfigError(fmt::format("config file not found: {}", cfg_path.string()));
  run.config = read_json_file(cfg_path, "config");
  if (!run.config.is_object()) throw ConfigError("config: top level must be a JSON object");
  run.base = cfg_path.parent_path();

  if (ov.has_seed) run.config["seed"] = ov.seed;
  try {
    run.seed = run.config.value("seed", kDefaultSeed);
  } catch (const json::exception&) {
    throw ConfigError("config: field 'seed' must be a non-negative integer");
  }
  run.config["seed"] = run.seed;

  if (!ov.output_dir.empty()) {
    run.out_dir = ov.output_dir;
  } else {
    const json& od = require(run.config, "output_dir", "config");
    if (!od.is_string()) throw ConfigError("field 'output_dir' must be a path string");
    run.out_dir = od.get<std::string>();
    if (run.out_dir.is_relative()) run.out_dir = run.base / run.out_dir;
  }
  run.config.erase("output_dir");
  return run;
}

void make_output_dir(const Run& run) {
  std::error_code ec;
  fs::create_directories(run.out_dir, ec);
  if (ec)
    throw ConfigError(
        fmt::format("cannot create output_dir '{}': {}", run.out_dir.string(), ec.message()));
}

RandomScheduleOptions schedule_options_from_json(const json& j) {
  RandomScheduleOptions o;
  try {
    o.hours = j.value("hours", o.hours);
    o.segment_h = j.value("segment_h", o.segment_h);
    o.c_rate_max = j.value("c_rate_max", o.c_rate_max);
    o.rest_probability = j.value("rest_probability", o.rest_probability);
    o.temp_mean_c = j.value("temp_mean_c", o.temp_mean_c);
    o.temp_daily_amplitude_c = j.value("temp_daily_amplitude_c", o.temp_daily_amplitude_c);
    o.temp_cell_spread_c = j.value("temp_cell_spread_c", o.temp_cell_spread_c);
    o.temp_noise_c = j.value("temp_noise_c", o.temp_noise_c);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("schedule: {}", e.what()));
  }
  if (!(o.hours > 0.0) || !(o.segment_h > 0.0) || !(o.c_rate_max >= 0.0) ||
      !(o.rest_probability >= 0.0 && o.rest_probability <= 1.0))
    throw ConfigError("schedule: hours and segment_h must be > 0, c_rate_max >= 0, "
                      "rest_probability in [0, 1]");
  return o;
}

FeaturizeOptions featurize_options_from_json(const json& j) {
  FeaturizeOptions o;
  try {
    o.window_s = j.value("window_s", o.window_s);
    o.rated_capacity_ah = j.value("rated_capacity_ah", o.rated_capacity_ah);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("featurize: {}", e.what()));
  }
  if (!(o.window_s > 0.0) || !(o.rated_capacity_ah > 0.0))
    throw ConfigError("featurize: window_s and rated_capacity_ah must be > 0");
  return o;
}

std::vector<std::string> cell_ids_from_json(const json& j) {
  std::vector<std::string> ids = {"RW9", "RW10", "RW11", "RW12"};
  if (!j.contains("cells")) return ids;
  try {
    ids = j.at("cells").get<std::vector<std::string>>();
  } catch (const json::exception&) {
    throw ConfigError("field 'cells' must be a list of cell ids");
  }
  if (ids.empty()) throw ConfigError("field 'cells' must not be empty");
  return ids;
}

// Cell i of a synthetic set is driven by the schedule drawn with seed + 1 + i.
std::vector<SynthCell> synth_cells(const json& spec, std::uint64_t seed) {
  const DegradationOracle oracle(oracle_params_from_json(object_or_empty(spec, "oracle", "synthetic")));
  const RandomScheduleOptions sched =
      schedule_options_from_json(object_or_empty(spec, "schedule", "synthetic"));
  const int rows = spec.value("rows_per_segment", 3);
  std::vector<SynthCell> cells;
  const auto ids = cell_ids_from_json(spec);
  for (std::size_t i = 0; i < ids.size(); ++i)
    cells.push_back(synth_oracle(oracle, ids[i], random_schedule(seed + 1 + i, sched),
                                 static_cast<std::size_t>(rows)));
  return cells;
}

std::vector<CyclingRecord> all_records(const std::vector<SynthCell>& cells) {
  std::vector<CyclingRecord> records;
  for (const auto& c : cells) records.insert(records.end(), c.records.begin(), c.records.end());
  return records;
}

std::vector<double> targets_of(std::span<const DegradationSample> samples) {
  std::vector<double> t;
  t.reserve(samples.size());
  for (const auto& s : samples) t.push_back(s.q_loss_ah);
  return t;
}

int cmd_train(Run& run) {
  const json& data = require(run.config, "data", "train config");
  std::vector<DegradationSample> samples;
  std::optional<FeaturizeReport> feat_report;
  if (data.contains("samples_csv")) {
    SampleTable table = load_samples_csv(input_path(run, data, "samples_csv", "data.samples_csv"));
    if (!table.has_targets) throw DataError("data.samples_csv has no q_loss_ah column");
    samples = std::move(table.samples);
  } else if (data.contains("cycling_csv")) {
    const auto records = load_cycling_csv(input_path(run, data, "cycling_csv", "data.cycling_csv"));
    auto f = featurize(records, featurize_options_from_json(object_or_empty(data, "featurize", "data")));
    samples = std::move(f.samples);
    feat_report = f.report;
  } else if (data.contains("synthetic")) {
    const json& spec = data.at("synthetic");
    const auto records = all_records(synth_cells(spec, run.seed));
    auto f = featurize(records, featurize_options_from_json(object_or_empty(spec, "featurize", "data.synthetic")));
    samples = std::move(f.samples);
    feat_report = f.report;
  } else {
    throw ConfigError("field 'data' needs one of samples_csv, cycling_csv, synthetic");
  }
  if (samples.empty()) throw DataError("no training samples");

  const PicnnArch arch = picnn_arch_from_json(object_or_empty(run.config, "arch", "train config"));
  TrainConfig tc = train_config_from_json(object_or_empty(run.config, "train", "train config"));
  tc.seed = run.seed;
  make_output_dir(run);

  const DatasetSplit split = split_dataset(samples, tc);
  const TrainResult result = train_split(split, arch, tc);
  const auto pred = predict(result.weights, split.validation);
  const FitReport fit = fit_report(pred, targets_of(split.validation));

  save_weights(result.weights, run.out_dir / "weights.json");
  run.outputs.push_back("weights.json");
  json report = to_json(result.report);
  report["validation_fit"] = to_json(fit);
  write_json(run, "train_report.json", report);
  write_file(run, "loss.csv", [&](std::ostream& o) { write_loss_csv(o, result.report); });
  if (feat_report) write_json(run, "featurize_report.json", to_json(*feat_report));
  write_manifest(run);

  *run.out << fmt::format("split: {}\n", split.description);
  *run.out << fmt::format("train rows {}, validation rows {}\n", split.train.size(),
                          split.validation.size());
  *run.out << fmt::format("final train mse {:.6g}, validation mse {:.6g}\n",
                          result.report.train_mse.back(), result.report.val_mse.back());
  *run.out << fmt::format("validation R2 = {:.17g}\n", fit.r2);
  return kExitOk;
}

int cmd_predict(Run& run) {
  const PicnnWeights w = load_picnn(input_path(run, run.config, "weights", "weights"));
  const SampleTable table =
      load_samples_csv(input_path(run, run.config, "samples_csv", "samples_csv"));
  if (table.samples.empty()) throw DataError("samples_csv has no rows");
  make_output_dir(run);
  const auto pred = predict(w, table.samples);
  write_file(run, "predictions.csv", [&](std::ostream& o) {
    o << "cell_id,elapsed_h,temp_c,c_rate,q_loss_pred_ah\n";
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const auto& s = table.samples[i];
      o << s.cell_id << ',' << format_double(s.elapsed_h) << ',' << format_double(s.temp_c)
        << ',' << format_double(s.c_rate) << ',' << format_double(pred[i]) << '\n';
    }
  });
  std::optional<FitReport> fit;
  if (table.has_targets) {
    fit = fit_report(pred, targets_of(table.samples));
    write_json(run, "fit_report.json", to_json(*fit));
  }
  write_manifest(run);
  *run.out << fmt::format("predicted {} rows\n", pred.size());
  if (fit) *run.out << fmt::format("R2 = {:.17g}\n", fit->r2);
  return kExitOk;
}

struct Session {
  ChargingProblem problem;
  PicnnWeights weights;
  SolveConfig solver;
};

Session load_session(Run& run, const Overrides& ov) {
  Session s;
  s.weights = load_picnn(input_path(run, run.config, "weights", "weights"));
  s.problem.pack = pack_params_from_json(object_or_empty(run.config, "pack", "config"));
  s.problem.alpha = load_series_csv(input_path(run, run.config, "tariff_csv", "tariff_csv"));
  s.problem.temp_c =
      load_series_csv(input_path(run, run.config, "temperature_csv", "temperature_csv"));
  if (s.problem.alpha.size() != s.problem.temp_c.size())
    throw DataError(fmt::format("tariff has {} intervals, temperature forecast has {}",
                                s.problem.alpha.size(), s.problem.temp_c.size()));
  try {
    s.problem.battery_age_h = run.config.value("battery_age_h", s.problem.battery_age_h);
    if (ov.has_rho) run.config["rho"] = ov.rho;
    s.problem.rho = run.config.value("rho", s.problem.rho);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
  s.solver = solve_config_from_json(object_or_empty(run.config, "solver", "config"));
  s.solver.seed = run.seed;
  s.problem.validate();
  // Fail fast with the reachability explanation.
  (void)FeasibleSet(s.problem.pack, s.problem.horizon());
  return s;
}

int cmd_optimize(Run& run, const Overrides& ov) {
  const Session s = load_session(run, ov);
  const Schedule sched = solve(s.problem, s.weights, s.solver);
  const FeasibleSet set(s.problem.pack, s.problem.horizon());
  const FeasibilityReport feas = set.check(sched.u, 1e-6);
  make_output_dir(run);
  json j = to_json(sched);
  j["feasibility"] = to_json(feas);
  j["pack"] = to_json(s.problem.pack);
  j["battery_age_h"] = s.problem.battery_age_h;
  write_json(run, "schedule.json", j);
  write_file(run, "schedule.csv", [&](std::ostream& o) { write_schedule_csv(o, sched); });
  write_manifest(run);

  *run.out << fmt::format("rho = {}\n", sched.rho);
  *run.out << fmt::format("theta1 = {:.10f} EUR\n", sched.theta1);
  *run.out << fmt::format("theta2 = {:.10f} EUR\n", sched.theta2);
  *run.out << fmt::format("J = {:.10f} EUR\n", sched.J);
  *run.out << fmt::format("terminal energy = {:.6f} p.u., iterations = {}, converged = {}\n",
                          sched.energy.back(), sched.iterations, sched.converged);
  if (!feas.feasible)
    throw Error(fmt::format("schedule violates constraint {} at interval {}",
                            feas.violations.front().constraint,
                            feas.violations.front().interval));
  if (!sched.converged) {
    const std::string msg = fmt::format("solver stopped after {} iterations without converging",
                                        sched.iterations);
    if (ov.strict) throw ConvergenceError(msg, sched.fixed_point_residual);
    *run.err << "warning: " << msg << '\n';
  }
  return kExitOk;
}

int cmd_sweep(Run& run, const Overrides& ov) {
  const Session s = load_session(run, ov);
  std::vector<double> rhos = default_rho_grid();
  bool warm = true;
  try {
    if (run.config.contains("rhos")) rhos = run.config.at("rhos").get<std::vector<double>>();
    warm = run.config.value("warm_start", true);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
  if (rhos.empty()) throw ConfigError("field 'rhos' must not be empty");
  const auto points = sweep(s.problem, s.weights, rhos, s.solver, warm);
  const auto dominated = dominated_pairs(points, 1e-6);
  make_output_dir(run);
  write_file(run, "tradeoff.csv", [&](std::ostream& o) { write_tradeoff_csv(o, points); });
  json j = {{"points", json::array()}, {"dominated", json::array()}};
  for (const auto& p : points) j["points"].push_back(to_json(p));
  for (const auto& [a, b] : dominated) j["dominated"].push_back({{"by", a}, {"point", b}});
  write_json(run, "tradeoff.json", j);
  write_manifest(run);

  *run.out << fmt::format("{:>5} {:>16} {:>16} {:>16} {:>6}\n", "rho", "theta1_eur",
                          "theta2_eur", "J_eur", "iters");
  std::size_t failed = 0;
  for (const auto& p : points) {
    *run.out << fmt::format("{:>5.2f} {:>16.10f} {:>16.10f} {:>16.10f} {:>6}\n", p.rho,
                            p.theta1, p.theta2, p.J, p.iterations);
    if (!p.converged) ++failed;
    if (!p.error.empty()) *run.err << fmt::format("warning: rho = {}: {}\n", p.rho, p.error);
  }
  if (failed > 0) {
    const std::string msg = fmt::format("{} of {} sweep points did not converge", failed,
                                        points.size());
    if (ov.strict) throw ConvergenceError(msg, 0.0);
    *run.err << "warning: " << msg << '\n';
  }
  return kExitOk;
}

int cmd_gen_synth(Run& run) {
  const auto cells = synth_cells(run.config, run.seed);
  const auto records = all_records(cells);
  const auto f =
      featurize(records, featurize_options_from_json(object_or_empty(run.config, "featurize", "config")));
  make_output_dir(run);
  write_file(run, "cycling.csv", [&](std::ostream& o) { write_cycling_csv(o, records); });
  write_file(run, "samples.csv",
             [&](std::ostream& o) { write_samples_csv(o, f.samples, true); });
  write_json(run, "featurize_report.json", to_json(f.report));
  write_json(run, "oracle.json",
             to_json(oracle_params_from_json(object_or_empty(run.config, "oracle", "config"))));
  write_manifest(run);
  *run.out << fmt::format("{} cells, {} records, {} samples\n", cells.size(), records.size(),
                          f.samples.size());
  return kExitOk;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

int fail(std::ostream& err, int code, const char* kind, const std::string& message) {
  err << fmt::format("error: code={} kind={} message={}\n", code, kind, one_line(message));
  return code;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Degradation-aware V2G charging: train, predict, optimize, sweep, gen-synth",
               "v2g"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Overrides ov;
  struct Sub {
    CLI::App* app;
    CLI::Option* seed;
    CLI::Option* rho;
  };
  auto add = [&](const char* name, const char* desc, bool solver, bool rho = false) {
    CLI::App* s = app.add_subcommand(name, desc);
    s->add_option("-c,--config", ov.config, "JSON config file")->required();
    s->add_option("-o,--output-dir", ov.output_dir, "override the config's output_dir");
    Sub sub{s, s->add_option("--seed", ov.seed, "override the root seed"), nullptr};
    if (rho)
      sub.rho = s->add_option("--rho", ov.rho, "override rho")->check(CLI::Range(0.0, 1.0));
    if (solver) {
      s->add_flag("--strict", ov.strict, "exit 6 when the solver does not converge");
    }
    return sub;
  };
  const Sub train_cmd = add("train", "fit the degradation network", false);
  const Sub predict_cmd = add("predict", "predict capacity loss for a sample CSV", false);
  const Sub optimize_cmd = add("optimize", "compute a charging schedule", true, true);
  const Sub sweep_cmd = add("sweep", "trade-off curve over rho", true);
  const Sub synth_cmd = add("gen-synth", "generate synthetic cycling data", false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    return fail(err, kExitConfig, "usage", e.what());
  }

  for (const Sub* s : {&train_cmd, &predict_cmd, &optimize_cmd, &sweep_cmd, &synth_cmd}) {
    if (s->app->parsed()) {
      ov.has_seed = s->seed->count() > 0;
      ov.has_rho = s->rho && s->rho->count() > 0;
    }
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Run run = start_run(command, ov, out, err);
    if (command == "train") return cmd_train(run);
    if (command == "predict") return cmd_predict(run);
    if (command == "optimize") return cmd_optimize(run, ov);
    if (command == "sweep") return cmd_sweep(run, ov);
    return cmd_gen_synth(run);
  } catch (const ConfigError& e) {
    return fail(err, kExitConfig, "config", e.what());
  } catch (const DataError& e) {
    return fail(err, kExitData, "data", e.what());
  } catch (const DimensionError& e) {
    return fail(err, kExitData, "data", e.what());
  } catch (const DivergenceError& e) {
    return fail(err, kExitDivergence, "divergence", e.what());
  } catch (const NumericError& e) {
    return fail(err, kExitDivergence, "numeric", e.what());
  } catch (const InfeasibleError& e) {
    return fail(err, kExitInfeasible, "infeasible", e.what());
  } catch (const ConvergenceError& e) {
    return fail(err, kExitNotConverged, "not_converged", e.what());
  } catch (const std::exception& e) {
    return fail(err, kExitInternal, "internal", e.what());
  }
}

}  // namespace v2g
