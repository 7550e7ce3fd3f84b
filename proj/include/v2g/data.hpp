#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "v2g/icnn.hpp"

namespace v2g {

/// One row of a battery cycling log. Units: seconds since cell start, volts,
/// amperes (positive = charge), degC, amp-hours.
struct CyclingRecord {
  std::string cell_id;
  double timestamp_s = 0.0;
  double voltage_v = 0.0;
  double current_a = 0.0;
  double temp_c = 0.0;
  std::optional<double> capacity_ah;  // set only on reference-capacity rows

  bool operator==(const CyclingRecord&) const = default;
};

/// Training pair: x = (elapsed hours, temperature), y = signed C-rate,
/// target = capacity lost over the sample's window [Ah].
struct DegradationSample {
  std::string cell_id;
  double elapsed_h = 0.0;
  double temp_c = 0.0;
  double c_rate = 0.0;
  double q_loss_ah = 0.0;

  PicnnInput input() const { return {{elapsed_h, temp_c}, {c_rate}}; }
};

inline constexpr std::string_view kCyclingCsvHeader =
    "cell_id,timestamp_s,voltage_v,current_a,temp_c,capacity_ah";
inline constexpr std::string_view kSamplesCsvHeader =
    "cell_id,elapsed_h,temp_c,c_rate,q_loss_ah";

/// Parses the cycling CSV. Throws DataError with the 1-based line number on a
/// malformed row, an out-of-range value, or a non-increasing timestamp.
std::vector<CyclingRecord> load_cycling_csv(const std::filesystem::path& path);
std::vector<CyclingRecord> parse_cycling_csv(std::istream& in);
void write_cycling_csv(std::ostream& out, std::span<const CyclingRecord> records);

struct FeaturizeOptions {
  double window_s = 900.0;
  double rated_capacity_ah = 2.1;
};

struct FeaturizeReport {
  std::size_t cells_processed = 0;
  std::size_t samples_emitted = 0;
  std::vector<std::string> warnings;
};

struct FeaturizeResult {
  std::vector<DegradationSample> samples;
  FeaturizeReport report;
};

/// Turns cycling records into degradation samples. Between consecutive
/// capacity references the log is cut into windows of window_s seconds
/// (anchored at the earlier reference). Each record holds its current and
/// temperature until the next record of the same cell. Per window:
///   elapsed_h = window midpoint, hours since the cell's first record
///   temp_c    = time-weighted mean temperature
///   c_rate    = RMS of current / rated capacity, signed by net energy flow
///   q_loss_ah = capacity drop between the references, split across windows
///               in proportion to charge throughput (by duration if idle)
FeaturizeResult featurize(std::span<const CyclingRecord> records,
                          const FeaturizeOptions& options = {});

nlohmann::json to_json(const FeaturizeReport& r);

/// Samples CSV; the q_loss_ah column may be empty (prediction inputs).
struct SampleTable {
  std::vector<DegradationSample> samples;
  bool has_targets = true;
};
SampleTable load_samples_csv(const std::filesystem::path& path);
SampleTable parse_samples_csv(std::istream& in);
void write_samples_csv(std::ostream& out, std::span<const DegradationSample> samples,
                       bool with_targets = true);

// ---------------------------------------------------------------------------
// Synthetic degradation oracle

/// Closed-form capacity fade used as desk-scale ground truth:
///   q = k_cal * A(T; Ea_cal) * d / sqrt(1 + t_mid / t_knee)
///     + k_cyc * A(T; Ea_cyc) * d * |c|^exponent
/// with A(T; Ea) = exp(-Ea / R * (1/T_K - 1/T_ref)), t_mid = t0 + d/2, and
/// times in hours. The calendar rate decays like 1/sqrt(age).
/// exponent >= 1 keeps q convex and increasing in |c|.
struct OracleParams {
  double rated_capacity_ah = 2.1;
  double k_cal = 1.8e-4;        // Ah / h at age 0
  double t_knee_h = 50.0;
  double ea_cal = 2.4e4;        // J/mol
  double k_cyc = 1.6e-4;        // Ah / h at |c| = 1
  double ea_cyc = 3.1e4;        // J/mol
  double exponent = 1.5;
  double t_ref_c = 25.0;
  double nominal_voltage = 3.7;

  void validate() const;
};

struct OracleSegment {
  double c_rate = 0.0;
  double temp_c = 25.0;
  double duration_h = 0.25;
};

class DegradationOracle {
 public:
  explicit DegradationOracle(OracleParams p);
  const OracleParams& params() const noexcept { return p_; }

  /// Capacity lost [Ah] while holding (c_rate, temp) from t0_h for duration_h.
  double q_loss(double c_rate, double temp_c, double t0_h, double duration_h) const;
  double calendar_loss(double temp_c, double t0_h, double duration_h) const;
  double cyclic_loss(double c_rate, double temp_c, double duration_h) const;

 private:
  double arrhenius(double ea, double temp_c) const;
  OracleParams p_;
};

struct SynthCell {
  std::vector<CyclingRecord> records;
  std::vector<OracleSegment> segments;
  std::vector<double> segment_loss_ah;  // ground truth per segment
};

/// Emits a cycling log for the segment schedule: rows_per_segment rows per
/// segment with a capacity reference on the first, plus a closing reference.
SynthCell synth_oracle(const DegradationOracle& oracle, std::string cell_id,
                       std::span<const OracleSegment> schedule,
                       std::size_t rows_per_segment = 3);

struct RandomScheduleOptions {
  double hours = 1200.0;
  double segment_h = 0.25;
  double c_rate_max = 2.0;
  double rest_probability = 0.1;
  double temp_mean_c = 25.0;
  double temp_daily_amplitude_c = 8.0;
  double temp_cell_spread_c = 6.0;  // per-cell offset range (+/-)
  double temp_noise_c = 2.0;
};

/// Seeded randomized usage: uniform signed C-rates, occasional rests, and a
/// daily temperature cycle with a per-cell offset.
std::vector<OracleSegment> random_schedule(std::uint64_t seed,
                                           const RandomScheduleOptions& options = {});

nlohmann::json to_json(const OracleParams& p);
OracleParams oracle_params_from_json(const nlohmann::json& j);

std::string format_double(double v);  // 17 significant digits

}  // namespace v2g
