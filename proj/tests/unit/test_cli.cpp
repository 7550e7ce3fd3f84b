#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "generators.hpp"
#include "v2g/cli.hpp"
#include "v2g/data.hpp"
#include "v2g/icnn_io.hpp"

using namespace v2g;
using namespace v2g::testing;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Result {
  int code = -1;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "v2g");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path work(const std::string& name) {
  const fs::path d = fs::path(V2G_WORK_DIR) / "cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_json(const fs::path& p, const json& j) {
  std::ofstream(p) << j.dump(2);
  return p;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const std::string kRoot = V2G_SOURCE_DIR;

// The shipped scenario with absolute paths so it can live anywhere.
json paper_default() {
  json j = read_json(kRoot + "/configs/paper-default.json");
  j["weights"] = kRoot + "/models/synthetic-picnn.json";
  j["tariff_csv"] = kRoot + "/configs/tariff_evening.csv";
  j["temperature_csv"] = kRoot + "/configs/temperature_evening.csv";
  j.erase("output_dir");
  return j;
}

std::vector<std::vector<double>> read_numeric_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::istringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) r.push_back(std::stod(f));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 2 with a parseable line") {
  auto r = run({"optimize", "--no-such-flag", "-c", "x.json"});
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: code=2 kind=usage message=", 0) == 0);
  CHECK(run({}).code == 2);
  CHECK(run({"optimize", "-c", "x.json", "--rho", "1.5"}).code == 2);
  r = run({"optimize", "-c", "/nonexistent/config.json"});
  CHECK(r.code == 2);
  CHECK(r.err.find("kind=config") != std::string::npos);
  CHECK(run({"--version"}).code == 0);
}

TEST_CASE("missing dataset path names the field") {
  const fs::path d = work("missing");
  auto r = run({"train", "-c", write_json(d / "a.json", {{"output_dir", "o"}}).string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("'data'") != std::string::npos);
  r = run({"train", "-c",
           write_json(d / "b.json", {{"data", {{"samples_csv", "nope.csv"}}}, {"output_dir", "o"}})
               .string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("data.samples_csv") != std::string::npos);
  json cfg = paper_default();
  cfg.erase("tariff_csv");
  r = run({"optimize", "-c", write_json(d / "c.json", cfg).string(), "-o", (d / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("tariff_csv") != std::string::npos);
}

TEST_CASE("bad data exits 3, divergence exits 4") {
  const fs::path d = work("codes");
  std::ofstream(d / "bad.csv") << kSamplesCsvHeader << "\nA,1,25,oops,0.1\n";
  auto r = run({"train", "-c",
                write_json(d / "a.json", {{"data", {{"samples_csv", "bad.csv"}}}, {"output_dir", "o"}})
                    .string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("line 2") != std::string::npos);

  const json diverge = {
      {"data", {{"synthetic", {{"schedule", {{"hours", 24.0}}}}}}},
      {"arch", {{"convex_widths", {6, 1}}, {"nonconvex_widths", {4}}}},
      {"train", {{"initial_lr", 1e300}, {"epochs", 2}}},
      {"output_dir", "o"}};
  r = run({"train", "-c", write_json(d / "b.json", diverge).string()});
  CHECK(r.code == 4);
  CHECK(r.err.find("kind=divergence") != std::string::npos);
}

TEST_CASE("unreachable target energy exits 5") {
  const fs::path d = work("infeasible");
  std::ofstream(d / "tariff.csv") << "interval,alpha\n0,0.2\n";
  std::ofstream(d / "temp.csv") << "interval,temp\n0,20\n";
  json cfg = paper_default();
  cfg["tariff_csv"] = (d / "tariff.csv").string();
  cfg["temperature_csv"] = (d / "temp.csv").string();
  cfg["pack"]["e0"] = 0.2;
  cfg["pack"]["e_des"] = 0.9;
  const auto r = run({"optimize", "-c", write_json(d / "c.json", cfg).string(), "-o",
                      (d / "o").string()});
  CHECK(r.code == 5);
  CHECK(r.err.find("cannot reach") != std::string::npos);
  CHECK_FALSE(fs::exists(d / "o" / "schedule.csv"));
}

TEST_CASE("predict reproduces the golden fit") {
  const fs::path d = work("predict");
  const json cfg = {{"weights", kRoot + "/tests/data/predict_weights.json"},
                    {"samples_csv", kRoot + "/tests/data/predict_samples.csv"},
                    {"output_dir", "o"}};
  const auto r = run({"predict", "-c", write_json(d / "p.json", cfg).string()});
  REQUIRE(r.code == 0);
  const double golden = read_json(kRoot + "/tests/data/predict_golden.json").at("r2");
  const double r2 = read_json(d / "o" / "fit_report.json").at("r2");
  CHECK(std::abs(r2 - golden) <= 1e-9);
  CHECK(r.out.find("R2 = ") != std::string::npos);
  CHECK(read_text(d / "o" / "predictions.csv").rfind("cell_id,elapsed_h,temp_c,c_rate,q_loss_pred_ah\n", 0) == 0);
  const json m = read_json(d / "o" / "manifest.json");
  CHECK(m.at("command") == "predict");
  CHECK(m.at("outputs").size() == 2);
}

TEST_CASE("predict: exact targets give 1, targets around a constant give 0") {
  const fs::path d = work("predict_r2");
  // Zero weights: the network outputs softplus(0) = ln 2 everywhere.
  save_weights(make_picnn(small_arch()), d / "const.json");
  std::vector<DegradationSample> s(40);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i].cell_id = "A";
    s[i].elapsed_h = static_cast<double>(i);
    s[i].temp_c = 25.0;
    s[i].c_rate = 0.5;
    s[i].q_loss_ah = std::log(2.0) + (i % 2 ? 0.125 : -0.125);
  }
  {
    std::ofstream f(d / "around.csv");
    write_samples_csv(f, s);
  }
  auto r = run({"predict", "-c",
                write_json(d / "a.json", {{"weights", "const.json"},
                                          {"samples_csv", "around.csv"},
                                          {"output_dir", "oa"}})
                    .string()});
  REQUIRE(r.code == 0);
  CHECK(std::abs(double(read_json(d / "oa" / "fit_report.json").at("r2"))) <= 1e-12);

  // targets = the model's own predictions
  const json wcfg = {{"weights", kRoot + "/tests/data/predict_weights.json"},
                     {"samples_csv", kRoot + "/tests/data/predict_samples.csv"},
                     {"output_dir", "ob"}};
  REQUIRE(run({"predict", "-c", write_json(d / "b.json", wcfg).string()}).code == 0);
  {
    std::ifstream in(d / "ob" / "predictions.csv");
    std::ofstream outf(d / "self.csv");
    std::string line;
    std::getline(in, line);
    outf << kSamplesCsvHeader << '\n';
    while (std::getline(in, line)) outf << line << '\n';
  }
  const json scfg = {{"weights", kRoot + "/tests/data/predict_weights.json"},
                     {"samples_csv", "self.csv"},
                     {"output_dir", "oc"}};
  REQUIRE(run({"predict", "-c", write_json(d / "c.json", scfg).string()}).code == 0);
  CHECK(double(read_json(d / "oc" / "fit_report.json").at("r2")) == 1.0);
}

TEST_CASE("optimize on the default scenario") {
  const fs::path d = work("optimize");
  const fs::path cfg = write_json(d / "c.json", paper_default());
  auto r = run({"optimize", "-c", cfg.string(), "-o", (d / "o").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("theta1 = ") != std::string::npos);
  const json s = read_json(d / "o" / "schedule.json");
  CHECK(s.at("feasibility").at("feasible") == true);
  CHECK(s.at("u_kw").size() == 48);
  const double e_T = s.at("energy_pu").back();
  CHECK(std::abs(e_T - 0.7) <= 0.02 + 1e-6);
  CHECK(s.at("pack").at("gamma") == 585.0);

  const json m = read_json(d / "o" / "manifest.json");
  CHECK(m.at("seed") == 42);
  CHECK(m.at("version") == std::string(kVersion));
  CHECK(m.at("config_hash").get<std::string>().rfind("fnv1a64:", 0) == 0);
  CHECK(m.at("outputs") == json({"schedule.json", "schedule.csv"}));

  // --seed is recorded and changes the hash
  r = run({"optimize", "-c", cfg.string(), "-o", (d / "o2").string(), "--seed", "7"});
  REQUIRE(r.code == 0);
  const json m2 = read_json(d / "o2" / "manifest.json");
  CHECK(m2.at("seed") == 7);
  CHECK(m2.at("config_hash") != m.at("config_hash"));
}

TEST_CASE("rho = 1 discharges when the price is high") {
  const fs::path d = work("rho1");
  const auto r = run({"optimize", "-c", write_json(d / "c.json", paper_default()).string(), "-o",
                      (d / "o").string(), "--rho", "1"});
  REQUIRE(r.code == 0);
  const json s = read_json(d / "o" / "schedule.json");
  const std::vector<double> u = s.at("u_kw"), a = s.at("alpha_eur_per_kwh");
  double mu = 0, ma = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    mu += u[i];
    ma += a[i];
  }
  mu /= u.size();
  ma /= a.size();
  double cov = 0;
  for (std::size_t i = 0; i < u.size(); ++i) cov += (u[i] - mu) * (a[i] - ma);
  CHECK(cov < 0.0);
}

TEST_CASE("--strict turns non-convergence into exit 6") {
  const fs::path d = work("strict");
  json cfg = paper_default();
  cfg["solver"]["max_iters"] = 1;
  const fs::path p = write_json(d / "c.json", cfg);
  auto r = run({"optimize", "-c", p.string(), "-o", (d / "o").string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  r = run({"optimize", "-c", p.string(), "-o", (d / "o").string(), "--strict"});
  CHECK(r.code == 6);
  CHECK(r.err.find("kind=not_converged") != std::string::npos);
}

TEST_CASE("sweep endpoints reproduce optimize") {
  const fs::path d = work("sweep");
  json cfg = paper_default();
  cfg["rhos"] = {0.0, 0.5, 1.0};
  const fs::path p = write_json(d / "c.json", cfg);
  REQUIRE(run({"sweep", "-c", p.string(), "-o", (d / "s").string()}).code == 0);
  const auto rows = read_numeric_csv(d / "s" / "tradeoff.csv");
  REQUIRE(rows.size() == 3);
  CHECK(read_json(d / "s" / "tradeoff.json").at("dominated").empty());
  for (auto [idx, rho] : {std::pair{0, "0"}, std::pair{2, "1"}}) {
    REQUIRE(run({"optimize", "-c", p.string(), "-o", (d / rho).string(), "--rho", rho}).code == 0);
    const json s = read_json(d / rho / "schedule.json");
    const double J = s.at("J_eur"), t1 = s.at("theta1_eur"), t2 = s.at("theta2_eur");
    CHECK(std::abs(rows[idx][3] - J) <= 1e-6 * std::max(1.0, std::abs(J)));
    if (idx == 0) CHECK(std::abs(rows[idx][2] - t2) <= 1e-6 * std::max(1.0, std::abs(t2)));
    if (idx == 2) CHECK(std::abs(rows[idx][1] - t1) <= 1e-6);
  }
}

TEST_CASE("train and gen-synth are reproducible") {
  const fs::path d = work("train");
  const json cfg = {
      {"data", {{"synthetic", {{"schedule", {{"hours", 60.0}}}}}}},
      {"arch", {{"convex_widths", {8, 4, 1}}, {"nonconvex_widths", {8, 4}}}},
      {"train", {{"epochs", 4}, {"batch_size", 64}}},
      {"seed", 5},
      {"output_dir", "o1"}};
  const fs::path p = write_json(d / "t.json", cfg);
  auto r = run({"train", "-c", p.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("validation R2 = ") != std::string::npos);
  REQUIRE(run({"train", "-c", p.string(), "-o", (d / "o2").string()}).code == 0);
  CHECK(read_text(d / "o1" / "weights.json") == read_text(d / "o2" / "weights.json"));
  CHECK(read_text(d / "o1" / "loss.csv") == read_text(d / "o2" / "loss.csv"));
  REQUIRE(run({"train", "-c", p.string(), "-o", (d / "o3").string(), "--seed", "6"}).code == 0);
  CHECK(read_text(d / "o1" / "weights.json") != read_text(d / "o3" / "weights.json"));

  const json g = {{"schedule", {{"hours", 6.0}}}, {"output_dir", "g"}};
  REQUIRE(run({"gen-synth", "-c", write_json(d / "g.json", g).string()}).code == 0);
  for (const char* f : {"cycling.csv", "samples.csv", "featurize_report.json", "oracle.json",
                        "manifest.json"})
    CHECK(fs::exists(d / "g" / f));
  const auto recs = load_cycling_csv(d / "g" / "cycling.csv");
  CHECK(featurize(recs).report.cells_processed == 4);
}

}  // TEST_SUITE
