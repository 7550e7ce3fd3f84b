#include "v2g/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "v2g/error.hpp"

namespace v2g {
namespace {

constexpr double kGasConstant = 8.314462618;  // J/(mol K)

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

double parse_number(std::string_view field, std::size_t line, std::string_view column) {
  field = trim(field);
  double v = 0.0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
    throw DataError(
        fmt::format("line {}: column {}: '{}' is not a finite number", line, column, field));
  return v;
}

}  // namespace

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

// ---------------------------------------------------------------------------
// cycling CSV

std::vector<CyclingRecord> parse_cycling_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCyclingCsvHeader)
    throw DataError(fmt::format("line 1: header must be '{}'", kCyclingCsvHeader));
  std::vector<CyclingRecord> records;
  std::map<std::string, double, std::less<>> last_time;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(trim(line));
    if (f.size() != 6)
      throw DataError(fmt::format("line {}: expected 6 fields, got {}", lineno, f.size()));
    CyclingRecord r;
    r.cell_id = std::string(trim(f[0]));
    if (r.cell_id.empty()) throw DataError(fmt::format("line {}: empty cell_id", lineno));
    r.timestamp_s = parse_number(f[1], lineno, "timestamp_s");
    r.voltage_v = parse_number(f[2], lineno, "voltage_v");
    r.current_a = parse_number(f[3], lineno, "current_a");
    r.temp_c = parse_number(f[4], lineno, "temp_c");
    if (!trim(f[5]).empty()) r.capacity_ah = parse_number(f[5], lineno, "capacity_ah");

    if (!(r.temp_c > -40.0 && r.temp_c < 100.0))
      throw DataError(fmt::format("line {}: temperature {} outside (-40, 100) degC", lineno,
                                  r.temp_c));
    if (!(r.voltage_v > 0.0 && r.voltage_v < 5.0))
      throw DataError(
          fmt::format("line {}: voltage {} outside (0, 5) V", lineno, r.voltage_v));
    if (r.capacity_ah && !(*r.capacity_ah > 0.0))
      throw DataError(fmt::format("line {}: capacity must be positive", lineno));
    if (auto it = last_time.find(r.cell_id); it != last_time.end()) {
      if (!(r.timestamp_s > it->second))
        throw DataError(fmt::format("line {}: cell {}: timestamp {} does not increase", lineno,
                                    r.cell_id, r.timestamp_s));
      it->second = r.timestamp_s;
    } else {
      last_time.emplace(r.cell_id, r.timestamp_s);
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<CyclingRecord> load_cycling_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  return parse_cycling_csv(in);
}

void write_cycling_csv(std::ostream& out, std::span<const CyclingRecord> records) {
  out << kCyclingCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.cell_id << ',' << format_double(r.timestamp_s) << ','
        << format_double(r.voltage_v) << ',' << format_double(r.current_a) << ','
        << format_double(r.temp_c) << ',';
    if (r.capacity_ah) out << format_double(*r.capacity_ah);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// featurization

namespace {

struct WindowAcc {
  double t_begin = 0.0;
  double t_end = 0.0;
  double duration = 0.0;
  double temp_time = 0.0;     // sum temp * dt
  double crate_sq_time = 0.0;  // sum (I/C)^2 * dt
  double energy = 0.0;        // sum V I dt
  double throughput = 0.0;    // sum |I| dt
  bool used = false;
};

void featurize_cell(std::span<const CyclingRecord* const> rows, const FeaturizeOptions& opt,
                    std::vector<DegradationSample>& out) {
  const double t_origin = rows.front()->timestamp_s;
  std::vector<std::size_t> refs;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i]->capacity_ah) refs.push_back(i);

  for (std::size_t k = 0; k + 1 < refs.size(); ++k) {
    const std::size_t a = refs[k];
    const std::size_t b = refs[k + 1];
    const double t_a = rows[a]->timestamp_s;
    const double drop = *rows[a]->capacity_ah - *rows[b]->capacity_ah;
    const auto n_windows = static_cast<std::size_t>(
        std::ceil((rows[b]->timestamp_s - t_a) / opt.window_s));
    std::vector<WindowAcc> windows(std::max<std::size_t>(n_windows, 1));

    for (std::size_t j = a; j < b; ++j) {
      const auto& r = *rows[j];
      const double t0 = r.timestamp_s;
      const double t1 = rows[j + 1]->timestamp_s;
      const double dt_h = (t1 - t0) / 3600.0;
      auto w = static_cast<std::size_t>(std::floor((t0 - t_a) / opt.window_s));
      w = std::min(w, windows.size() - 1);
      auto& acc = windows[w];
      if (!acc.used) {
        acc.used = true;
        acc.t_begin = t0;
      }
      acc.t_end = t1;
      const double c = r.current_a / opt.rated_capacity_ah;
      acc.duration += dt_h;
      acc.temp_time += r.temp_c * dt_h;
      acc.crate_sq_time += c * c * dt_h;
      acc.energy += r.voltage_v * r.current_a * dt_h;
      acc.throughput += std::abs(r.current_a) * dt_h;
    }

    double total_throughput = 0.0;
    double total_duration = 0.0;
    for (const auto& w : windows) {
      total_throughput += w.throughput;
      total_duration += w.duration;
    }
    for (const auto& w : windows) {
      if (!w.used || !(w.duration > 0.0)) continue;
      const double share = total_throughput > 0.0 ? w.throughput / total_throughput
                                                  : w.duration / total_duration;
      DegradationSample s;
      s.cell_id = rows.front()->cell_id;
      s.elapsed_h = ((w.t_begin + w.t_end) / 2.0 - t_origin) / 3600.0;
      s.temp_c = w.temp_time / w.duration;
      const double rms = std::sqrt(w.crate_sq_time / w.duration);
      s.c_rate = w.energy < 0.0 ? -rms : rms;
      s.q_loss_ah = drop * share;
      out.push_back(std::move(s));
    }
  }
}

}  // namespace

FeaturizeResult featurize(std::span<const CyclingRecord> records,
                          const FeaturizeOptions& options) {
  if (!(options.window_s > 0.0)) throw ConfigError("featurize: window_s must be positive");
  if (!(options.rated_capacity_ah > 0.0))
    throw ConfigError("featurize: rated_capacity_ah must be positive");

  // group per cell, keeping first-appearance order of cells
  std::vector<std::string> order;
  std::map<std::string, std::vector<const CyclingRecord*>, std::less<>> cells;
  for (const auto& r : records) {
    auto [it, inserted] = cells.try_emplace(r.cell_id);
    if (inserted) order.push_back(r.cell_id);
    if (!it->second.empty() && !(r.timestamp_s > it->second.back()->timestamp_s))
      throw DataError(fmt::format("cell {}: records are not sorted by timestamp", r.cell_id));
    it->second.push_back(&r);
  }

  FeaturizeResult result;
  for (const auto& id : order) {
    const auto& rows = cells.at(id);
    std::size_t n_refs = 0;
    for (const auto* r : rows) n_refs += r->capacity_ah.has_value();
    if (n_refs < 2) {
      result.report.warnings.push_back(fmt::format(
          "cell {}: {} capacity reference(s), need at least 2; skipped", id, n_refs));
      continue;
    }
    featurize_cell(rows, options, result.samples);
    ++result.report.cells_processed;
  }
  result.report.samples_emitted = result.samples.size();
  return result;
}

nlohmann::json to_json(const FeaturizeReport& r) {
  return {{"cells_processed", r.cells_processed},
          {"samples_emitted", r.samples_emitted},
          {"warnings", r.warnings}};
}

// ---------------------------------------------------------------------------
// samples CSV

SampleTable parse_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kSamplesCsvHeader)
    throw DataError(fmt::format("line 1: header must be '{}'", kSamplesCsvHeader));
  SampleTable table;
  std::size_t lineno = 1;
  std::size_t with = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split_csv(trim(line));
    if (f.size() != 5)
      throw DataError(fmt::format("line {}: expected 5 fields, got {}", lineno, f.size()));
    DegradationSample s;
    s.cell_id = std::string(trim(f[0]));
    s.elapsed_h = parse_number(f[1], lineno, "elapsed_h");
    s.temp_c = parse_number(f[2], lineno, "temp_c");
    s.c_rate = parse_number(f[3], lineno, "c_rate");
    if (!trim(f[4]).empty()) {
      s.q_loss_ah = parse_number(f[4], lineno, "q_loss_ah");
      ++with;
    }
    if (s.elapsed_h < 0.0)
      throw DataError(fmt::format("line {}: elapsed_h must be non-negative", lineno));
    table.samples.push_back(std::move(s));
  }
  if (with != 0 && with != table.samples.size())
    throw DataError("q_loss_ah must be present on every row or on none");
  table.has_targets = with == table.samples.size() && with > 0;
  return table;
}

SampleTable load_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  return parse_samples_csv(in);
}

void write_samples_csv(std::ostream& out, std::span<const DegradationSample> samples,
                       bool with_targets) {
  out << kSamplesCsvHeader << '\n';
  for (const auto& s : samples) {
    out << s.cell_id << ',' << format_double(s.elapsed_h) << ',' << format_double(s.temp_c)
        << ',' << format_double(s.c_rate) << ',';
    if (with_targets) out << format_double(s.q_loss_ah);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// synthetic oracle

void OracleParams::validate() const {
  if (!(rated_capacity_ah > 0 && k_cal >= 0 && t_knee_h > 0 && k_cyc > 0 && ea_cal >= 0 && ea_cyc >= 0 &&
        nominal_voltage > 0 && nominal_voltage < 5))
    throw ConfigError("oracle parameters must be positive");
  if (!(exponent >= 1.0)) throw ConfigError("oracle exponent must be >= 1");
}

DegradationOracle::DegradationOracle(OracleParams p) : p_(p) { p_.validate(); }

double DegradationOracle::arrhenius(double ea, double temp_c) const {
  const double tk = temp_c + 273.15;
  const double tref = p_.t_ref_c + 273.15;
  return std::exp(-ea / kGasConstant * (1.0 / tk - 1.0 / tref));
}

double DegradationOracle::calendar_loss(double temp_c, double t0_h, double duration_h) const {
  const double t_mid = t0_h + duration_h / 2.0;
  return p_.k_cal * arrhenius(p_.ea_cal, temp_c) * duration_h /
         std::sqrt(1.0 + t_mid / p_.t_knee_h);
}

double DegradationOracle::cyclic_loss(double c_rate, double temp_c, double duration_h) const {
  return p_.k_cyc * arrhenius(p_.ea_cyc, temp_c) * duration_h *
         std::pow(std::abs(c_rate), p_.exponent);
}

double DegradationOracle::q_loss(double c_rate, double temp_c, double t0_h,
                                 double duration_h) const {
  return calendar_loss(temp_c, t0_h, duration_h) + cyclic_loss(c_rate, temp_c, duration_h);
}

SynthCell synth_oracle(const DegradationOracle& oracle, std::string cell_id,
                       std::span<const OracleSegment> schedule,
                       std::size_t rows_per_segment) {
  if (rows_per_segment == 0) throw ConfigError("rows_per_segment must be >= 1");
  const auto& p = oracle.params();
  SynthCell cell;
  cell.segments.assign(schedule.begin(), schedule.end());
  double t_h = 0.0;
  double capacity = p.rated_capacity_ah;
  for (const auto& seg : schedule) {
    if (!(seg.duration_h > 0.0)) throw ConfigError("segment duration must be positive");
    const double current = seg.c_rate * p.rated_capacity_ah;
    const double voltage = p.nominal_voltage + 0.05 * seg.c_rate;
    for (std::size_t j = 0; j < rows_per_segment; ++j) {
      CyclingRecord r;
      r.cell_id = cell_id;
      r.timestamp_s = (t_h + seg.duration_h * static_cast<double>(j) /
                                 static_cast<double>(rows_per_segment)) * 3600.0;
      r.voltage_v = voltage;
      r.current_a = current;
      r.temp_c = seg.temp_c;
      if (j == 0) r.capacity_ah = capacity;
      cell.records.push_back(std::move(r));
    }
    const double loss = oracle.q_loss(seg.c_rate, seg.temp_c, t_h, seg.duration_h);
    cell.segment_loss_ah.push_back(loss);
    capacity -= loss;
    t_h += seg.duration_h;
  }
  CyclingRecord last;
  last.cell_id = std::move(cell_id);
  last.timestamp_s = t_h * 3600.0;
  last.voltage_v = p.nominal_voltage;
  last.current_a = 0.0;
  last.temp_c = schedule.empty() ? p.t_ref_c : schedule.back().temp_c;
  last.capacity_ah = capacity;
  cell.records.push_back(std::move(last));
  return cell;
}

std::vector<OracleSegment> random_schedule(std::uint64_t seed,
                                           const RandomScheduleOptions& o) {
  if (!(o.hours > 0 && o.segment_h > 0)) throw ConfigError("schedule hours must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> crate(-o.c_rate_max, o.c_rate_max);
  std::uniform_real_distribution<double> spread(-o.temp_cell_spread_c, o.temp_cell_spread_c);
  std::uniform_real_distribution<double> noise(-o.temp_noise_c, o.temp_noise_c);
  const double offset = spread(rng);
  const auto n = static_cast<std::size_t>(std::llround(o.hours / o.segment_h));
  std::vector<OracleSegment> segs;
  segs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    OracleSegment s;
    s.duration_h = o.segment_h;
    const double rest = unit(rng);
    const double c = crate(rng);
    s.c_rate = rest < o.rest_probability ? 0.0 : c;
    const double t_mid = (static_cast<double>(i) + 0.5) * o.segment_h;
    s.temp_c = o.temp_mean_c + offset +
               o.temp_daily_amplitude_c * std::sin(2.0 * std::numbers::pi * t_mid / 24.0) +
               noise(rng) + 2.0 * std::abs(s.c_rate);  // joule heating
    segs.push_back(s);
  }
  return segs;
}

nlohmann::json to_json(const OracleParams& p) {
  return {{"rated_capacity_ah", p.rated_capacity_ah},
          {"k_cal", p.k_cal},
          {"t_knee_h", p.t_knee_h},
          {"ea_cal", p.ea_cal},
          {"k_cyc", p.k_cyc},
          {"ea_cyc", p.ea_cyc},
          {"exponent", p.exponent},
          {"t_ref_c", p.t_ref_c},
          {"nominal_voltage", p.nominal_voltage}};
}

OracleParams oracle_params_from_json(const nlohmann::json& j) {
  OracleParams p;
  try {
    p.rated_capacity_ah = j.value("rated_capacity_ah", p.rated_capacity_ah);
    p.k_cal = j.value("k_cal", p.k_cal);
    p.t_knee_h = j.value("t_knee_h", p.t_knee_h);
    p.ea_cal = j.value("ea_cal", p.ea_cal);
    p.k_cyc = j.value("k_cyc", p.k_cyc);
    p.ea_cyc = j.value("ea_cyc", p.ea_cyc);
    p.exponent = j.value("exponent", p.exponent);
    p.t_ref_c = j.value("t_ref_c", p.t_ref_c);
    p.nominal_voltage = j.value("nominal_voltage", p.nominal_voltage);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("oracle: {}", e.what()));
  }
  p.validate();
  return p;
}

}  // namespace v2g
