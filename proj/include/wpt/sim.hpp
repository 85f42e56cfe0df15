#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wpt/philox.hpp"
#include "wpt/types.hpp"

namespace wpt::sim {

// Large-scale attenuation in dB at a distance in meters.
double path_loss_db(double distance_m);

struct GeometrySpec {
  double half_width = 10.0;    // sensors drawn uniformly from [-half_width, half_width]^2
  double min_distance = 1.0;   // FC-sensor distances below this are resampled
};

struct GeometrySample {
  Mat coords;       // num_sensors x 2, meters; FC at the origin
  Vec distance;     // meters
  Vec amp_factor;   // per-sensor amplitude scale sqrt(10^(-PL/10))
};

// Consumes exactly two uniforms per accepted sensor position (more when a
// draw lands inside the exclusion disc and is rejected).
GeometrySample draw_geometry(int num_sensors, const GeometrySpec& spec, Philox& rng);

enum class ChannelMode {
  kNormalized,  // unit-variance entries, no geometry
  kPathLoss,    // entries scaled by the per-sensor path-loss amplitude
};

// Uplink then downlink, column by column; both directions share the sensor's
// large-scale factor (channel reciprocity). Pass the geometry only in
// path-loss mode.
ChannelRealization draw_channels(int num_sensors, int num_fc_antennas,
                                 const GeometrySample* geometry, Philox& rng);

// One extra FC-side channel column (for the shared-harvester experiments),
// drawn after the sensor channels.
CVec draw_harvester_channel(int num_fc_antennas, double amp_factor, Philox& rng);

enum class ExperimentKind {
  kMseVsIteration,    // sweep: FC antenna counts
  kMseVsNumSensors,   // sweep: sensor counts; optimal vs two-phase baseline
  kPowerVsIteration,  // sweep: FC antenna counts, fixed target
  kPowerVsGamma,      // sweep: distortion targets; optimal vs two-phase baseline
  kTradeoff,          // sweep: FC power grid; sizes: matched (n_s = n_r) pairs
  kPowerControlTable, // no sweep; per-sensor harvested vs transmit power
  kCustom,            // no sweep; per-trial converged figures
};

const char* kind_name(ExperimentKind kind);
ExperimentKind kind_from_name(const std::string& name);

struct ExperimentSpec {
  std::string name = "experiment";
  ExperimentKind kind = ExperimentKind::kCustom;
  std::vector<double> sweep;
  std::vector<int> sizes;        // kTradeoff only
  int trials = 200;
  std::uint64_t seed = 1;
  int num_sensors = 5;
  int num_fc_antennas = 5;
  double param_var = 1.0;
  double sense_var = 0.1;        // R_s = sense_var * I
  double rx_noise = 0.5;         // R_n = rx_noise * I
  double fc_power = 1.0;         // watts
  double harvest_eff = 1.0;
  double circuit_energy = 0.0;
  double target_mse = 0.0;       // distortion target for power experiments
  ChannelMode mode = ChannelMode::kNormalized;
  GeometrySpec geometry;
  int threads = 0;               // 0 = all hardware threads
  void validate() const;
};

struct ExperimentResult {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::string csv;        // rendered table, byte-stable for a given (spec, seed)
  std::string meta_json;  // resolved spec + code version
};

// Runs all trials (parallel across a worker pool, deterministic regardless of
// thread count), aggregates, and renders. Per-trial failures are counted in
// the emitted rows; the run continues.
ExperimentResult run_experiment(const ExperimentSpec& spec);

// Writes <name>.csv and <name>.meta.json under out_dir (created if needed).
void write_result(const ExperimentResult& result, const std::string& out_dir,
                  const std::string& name);

std::vector<std::string> preset_names();
ExperimentSpec preset(const std::string& name);

// Declarative spec files; format chosen by extension (.json or .toml).
ExperimentSpec load_spec(const std::string& path);
ExperimentSpec spec_from_json_text(const std::string& text);
std::string spec_to_json_text(const ExperimentSpec& spec);

inline constexpr const char* kCodeVersion = "0.1.0";

}  // namespace wpt::sim
