#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "generators.hpp"
#include "v2g/data.hpp"
#include "v2g/error.hpp"

using namespace v2g;
using namespace v2g::testing;

namespace {

std::vector<CyclingRecord> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_cycling_csv(in);
}

std::string header() { return std::string(kCyclingCsvHeader) + "\n"; }

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

CyclingRecord rec(std::string id, double t, double i, double temp,
                  std::optional<double> cap = std::nullopt) {
  CyclingRecord r;
  r.cell_id = std::move(id);
  r.timestamp_s = t;
  r.voltage_v = 3.7;
  r.current_a = i;
  r.temp_c = temp;
  r.capacity_ah = cap;
  return r;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("cycling csv: header only gives no records") {
  CHECK(parse(header()).empty());
}

TEST_CASE("cycling csv: three rows parse exactly") {
  const auto r = parse(header() +
                       "RW10,0,3.9,2.05,24.5,2.1\n"
                       "RW10,12.5,3.85,-1.25,25,\n"
                       "RW9,3,4.1,0,30.25,1.987654321\n");
  REQUIRE(r.size() == 3);
  CHECK(r[0].cell_id == "RW10");
  CHECK(r[0].timestamp_s == 0.0);
  CHECK(r[0].voltage_v == 3.9);
  CHECK(r[0].current_a == 2.05);
  CHECK(r[0].temp_c == 24.5);
  CHECK(r[0].capacity_ah == 2.1);
  CHECK(r[1].timestamp_s == 12.5);
  CHECK(r[1].current_a == -1.25);
  CHECK_FALSE(r[1].capacity_ah.has_value());
  CHECK(r[2].cell_id == "RW9");
  CHECK(r[2].temp_c == 30.25);
  CHECK(r[2].capacity_ah == 1.987654321);
}

TEST_CASE("cycling csv: out-of-range and malformed rows report the line") {
  CHECK(error_of(header() + "RW10,0,3.7,1,250,\n").find("line 2") != std::string::npos);
  CHECK(error_of(header() + "RW10,0,3.7,1,250,\n").find("temperature") != std::string::npos);
  CHECK(error_of(header() + "RW10,0,6,1,25,\n").find("voltage") != std::string::npos);
  CHECK(error_of(header() + "RW10,0,3.7,1,25,\nRW10,1,3.7,abc,25,\n").find("line 3") !=
        std::string::npos);
  CHECK(error_of(header() + "RW10,0,3.7,1\n").find("expected 6 fields") != std::string::npos);
  CHECK_FALSE(error_of("cell,timestamp\n").empty());
}

TEST_CASE("cycling csv: non-increasing timestamp names the cell and row") {
  const auto e = error_of(header() +
                          "RW10,0,3.7,1,25,\n"
                          "RW9,0,3.7,1,25,\n"
                          "RW10,5,3.7,1,25,\n"
                          "RW10,5,3.7,1,25,\n");
  CHECK(e.find("line 5") != std::string::npos);
  CHECK(e.find("RW10") != std::string::npos);
}

TEST_CASE("cycling csv: write then parse round-trips") {
  std::mt19937_64 rng(11);
  std::vector<CyclingRecord> rs;
  double t = 0.0;
  for (int i = 0; i < 50; ++i) {
    t += uniform(rng, 0.1, 100.0);
    auto r = rec("C", t, uniform(rng, -4, 4), uniform(rng, 0, 50));
    r.voltage_v = uniform(rng, 3.0, 4.2);
    if (i % 7 == 0) r.capacity_ah = uniform(rng, 1.5, 2.1);
    rs.push_back(r);
  }
  std::ostringstream out;
  write_cycling_csv(out, rs);
  CHECK(parse(out.str()) == rs);
}

TEST_CASE("featurize: 2.1 A on a 2.1 Ah cell is 1C") {
  std::vector<CyclingRecord> rs;
  for (int i = 0; i < 4; ++i) rs.push_back(rec("A", i * 300.0, 2.1, 25.0));
  rs.front().capacity_ah = 2.0;
  rs.push_back(rec("A", 1200.0, 2.1, 25.0, 1.99));
  const auto f = featurize(rs, {.window_s = 1200.0, .rated_capacity_ah = 2.1});
  REQUIRE(f.samples.size() == 1);
  CHECK(std::abs(f.samples[0].c_rate) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f.samples[0].c_rate > 0.0);
  CHECK(f.samples[0].elapsed_h == doctest::Approx(600.0 / 3600.0));
}

TEST_CASE("featurize: single window takes the whole capacity drop") {
  const std::vector<CyclingRecord> rs = {rec("A", 0.0, -1.0, 20.0, 2.0),
                                         rec("A", 450.0, -1.5, 30.0),
                                         rec("A", 900.0, 0.0, 25.0, 1.9)};
  const auto f = featurize(rs);
  REQUIRE(f.samples.size() == 1);
  CHECK(f.samples[0].q_loss_ah == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(f.samples[0].temp_c == doctest::Approx(25.0));
  CHECK(f.samples[0].c_rate < 0.0);  // net discharge
  const double rms = std::sqrt((1.0 + 2.25) / 2.0) / 2.1;
  CHECK(f.samples[0].c_rate == doctest::Approx(-rms).epsilon(1e-14));
  CHECK(f.report.cells_processed == 1);
  CHECK(f.report.samples_emitted == 1);
}

TEST_CASE("featurize: oracle targets are reproduced") {
  const DegradationOracle oracle(OracleParams{});
  RandomScheduleOptions o;
  o.hours = 24.0;
  const auto schedule = random_schedule(3, o);
  const auto cell = synth_oracle(oracle, "RW9", schedule, 5);
  // One capacity reference per segment and one window per segment.
  const auto f = featurize(cell.records, {.window_s = o.segment_h * 3600.0});
  REQUIRE(f.samples.size() == schedule.size());
  double t0 = 0.0;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& seg = schedule[i];
    const double truth = oracle.q_loss(seg.c_rate, seg.temp_c, t0, seg.duration_h);
    CHECK(std::abs(f.samples[i].q_loss_ah - truth) <= 1e-9);
    CHECK(std::abs(f.samples[i].c_rate) == doctest::Approx(std::abs(seg.c_rate)));
    CHECK(f.samples[i].temp_c == doctest::Approx(seg.temp_c));
    CHECK(f.samples[i].elapsed_h == doctest::Approx(t0 + seg.duration_h / 2));
    t0 += seg.duration_h;
  }
}

TEST_CASE("featurize: window targets sum to the measured drop") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<CyclingRecord> rs;
    double t = 0.0, cap = 2.1;
    const int n_refs = 2 + trial % 4;
    double expected = 0.0;
    for (int k = 0; k < n_refs; ++k) {
      rs.push_back(rec("A", t, uniform(rng, -3, 3), uniform(rng, 0, 45), cap));
      if (k + 1 == n_refs) break;
      const int rows = 1 + static_cast<int>(rng() % 40);
      for (int j = 0; j < rows; ++j) {
        t += uniform(rng, 10, 700);
        rs.push_back(rec("A", t, j % 5 == 0 ? 0.0 : uniform(rng, -3, 3), uniform(rng, 0, 45)));
      }
      t += uniform(rng, 10, 700);
      const double drop = uniform(rng, 0.0, 0.01);
      cap -= drop;
      expected += drop;
    }
    const auto f = featurize(rs, {.window_s = uniform(rng, 200, 3000)});
    double total = 0.0;
    for (const auto& s : f.samples) total += s.q_loss_ah;
    CHECK(std::abs(total - expected) <= 1e-9);
  }
}

TEST_CASE("featurize: idle span is apportioned by duration") {
  const std::vector<CyclingRecord> rs = {rec("A", 0.0, 0.0, 25.0, 2.0),
                                         rec("A", 900.0, 0.0, 25.0),
                                         rec("A", 2700.0, 0.0, 25.0, 1.97)};
  const auto f = featurize(rs, {.window_s = 900.0});
  // The second record holds for 1800 s, so it lands in one window twice as
  // long as the first.
  REQUIRE(f.samples.size() == 2);
  CHECK(f.samples[0].q_loss_ah == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(f.samples[1].q_loss_ah == doctest::Approx(0.02).epsilon(1e-12));
  CHECK(f.samples[0].c_rate == 0.0);
}

TEST_CASE("featurize: translation invariant in absolute time") {
  const DegradationOracle oracle(OracleParams{});
  RandomScheduleOptions o;
  o.hours = 12.0;
  const auto cell = synth_oracle(oracle, "RW11", random_schedule(5, o), 4);
  const auto base = featurize(cell.records, {.window_s = 1800.0});
  for (double shift : {1.0, 3600.0, 1.5e6}) {
    auto moved = cell.records;
    for (auto& r : moved) r.timestamp_s += shift;
    const auto f = featurize(moved, {.window_s = 1800.0});
    REQUIRE(f.samples.size() == base.samples.size());
    for (std::size_t i = 0; i < f.samples.size(); ++i) {
      CHECK(f.samples[i].elapsed_h == doctest::Approx(base.samples[i].elapsed_h).epsilon(1e-9));
      CHECK(f.samples[i].temp_c == doctest::Approx(base.samples[i].temp_c).epsilon(1e-9));
      CHECK(f.samples[i].c_rate == doctest::Approx(base.samples[i].c_rate).epsilon(1e-9));
      CHECK(f.samples[i].q_loss_ah == doctest::Approx(base.samples[i].q_loss_ah).epsilon(1e-9));
    }
  }
}

TEST_CASE("featurize: cell without two references is skipped with a warning") {
  const std::vector<CyclingRecord> rs = {rec("A", 0.0, 1.0, 25.0, 2.0),
                                         rec("B", 0.0, 1.0, 25.0, 2.0),
                                         rec("A", 900.0, 1.0, 25.0, 1.99),
                                         rec("B", 900.0, 1.0, 25.0)};
  const auto f = featurize(rs);
  CHECK(f.report.cells_processed == 1);
  CHECK(f.report.samples_emitted == 1);
  REQUIRE(f.report.warnings.size() == 1);
  CHECK(f.report.warnings[0].find("cell B") != std::string::npos);
  const auto j = to_json(f.report);
  CHECK(j.at("warnings").size() == 1);

  const std::vector<CyclingRecord> unsorted = {rec("A", 10.0, 1.0, 25.0, 2.0),
                                               rec("A", 5.0, 1.0, 25.0, 1.9)};
  CHECK_THROWS_AS(featurize(unsorted), DataError);
}

TEST_CASE("oracle: zero C-rate leaves only calendar ageing") {
  const DegradationOracle o(OracleParams{});
  for (double T : {0.0, 25.0, 40.0}) {
    CHECK(o.cyclic_loss(0.0, T, 2.0) == 0.0);
    CHECK(o.q_loss(0.0, T, 10.0, 2.0) == o.calendar_loss(T, 10.0, 2.0));
    CHECK(o.calendar_loss(T, 10.0, 2.0) > 0.0);
  }
}

TEST_CASE("oracle: more throughput means more loss") {
  const DegradationOracle o(OracleParams{});
  std::mt19937_64 rng(31);
  for (int i = 0; i < 500; ++i) {
    const double c = uniform(rng, 0.01, 1.5);
    const double T = uniform(rng, -10, 50);
    const double t0 = uniform(rng, 0, 2000);
    const double d = uniform(rng, 0.05, 2.0);
    CHECK(o.q_loss(2 * c, T, t0, d) > o.q_loss(c, T, t0, d));
    CHECK(o.q_loss(-2 * c, T, t0, d) > o.q_loss(-c, T, t0, d));
    CHECK(o.q_loss(c, T, t0, d) == o.q_loss(-c, T, t0, d));
  }
}

TEST_CASE("oracle: matches the frozen golden grid") {
  std::ifstream in(std::string(V2G_TEST_DATA) + "/oracle_golden.csv");
  REQUIRE(in);
  std::string line;
  std::getline(in, line);
  CHECK(line == "c_rate,temp_c,t0_h,duration_h,q_loss_ah");
  const DegradationOracle o(OracleParams{});
  std::size_t n = 0;
  while (std::getline(in, line)) {
    double v[5];
    std::istringstream ss(line);
    for (auto& x : v) {
      std::string f;
      std::getline(ss, f, ',');
      x = std::stod(f);
    }
    const double got = o.q_loss(v[0], v[1], v[2], v[3]);
    CHECK(got == doctest::Approx(v[4]).epsilon(1e-14));
    ++n;
  }
  CHECK(n == 100);
}

TEST_CASE("oracle: synthesis is deterministic") {
  const DegradationOracle o(OracleParams{});
  const auto a = synth_oracle(o, "RW9", random_schedule(99), 3);
  const auto b = synth_oracle(o, "RW9", random_schedule(99), 3);
  CHECK(a.records == b.records);
  CHECK(a.segment_loss_ah == b.segment_loss_ah);
  const auto c = synth_oracle(o, "RW9", random_schedule(100), 3);
  CHECK_FALSE(a.records == c.records);
}

TEST_CASE("oracle: invalid parameters are rejected") {
  OracleParams p;
  p.exponent = 0.5;
  CHECK_THROWS_AS(DegradationOracle{p}, ConfigError);
  p = {};
  p.k_cyc = -1;
  CHECK_THROWS_AS(DegradationOracle{p}, ConfigError);
  const auto j = to_json(OracleParams{});
  CHECK(oracle_params_from_json(j).k_cal == OracleParams{}.k_cal);
}

TEST_CASE("samples csv round-trip and target column rules") {
  std::mt19937_64 rng(41);
  std::vector<DegradationSample> s(30);
  for (auto& d : s) {
    d.cell_id = "RW12";
    d.elapsed_h = uniform(rng, 0, 1000);
    d.temp_c = uniform(rng, 0, 40);
    d.c_rate = uniform(rng, -2, 2);
    d.q_loss_ah = uniform(rng, 0, 1e-3);
  }
  std::ostringstream out;
  write_samples_csv(out, s);
  std::istringstream in(out.str());
  const auto t = parse_samples_csv(in);
  CHECK(t.has_targets);
  REQUIRE(t.samples.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(t.samples[i].elapsed_h == s[i].elapsed_h);
    CHECK(t.samples[i].c_rate == s[i].c_rate);
    CHECK(t.samples[i].q_loss_ah == s[i].q_loss_ah);
  }

  std::ostringstream bare;
  write_samples_csv(bare, s, false);
  std::istringstream in2(bare.str());
  CHECK_FALSE(parse_samples_csv(in2).has_targets);

  const std::string h = std::string(kSamplesCsvHeader) + "\n";
  std::istringstream mixed(h + "A,1,25,1,0.1\nA,2,25,1,\n");
  CHECK_THROWS_AS(parse_samples_csv(mixed), DataError);
  std::istringstream negative(h + "A,-1,25,1,0.1\n");
  CHECK_THROWS_AS(parse_samples_csv(negative), DataError);
}

}  // TEST_SUITE
