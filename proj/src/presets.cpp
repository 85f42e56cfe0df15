#include "wpt/sim.hpp"
#include "wpt/units.hpp"

namespace wpt::sim {

namespace {

// Shared by the figure presets: unit-variance channels, R_s = 0.1 I,
// R_n = 0.5 I, unit prior variance, 1 W (30 dBm) FC budget.
ExperimentSpec figure_defaults() {
  ExperimentSpec s;
  s.param_var = 1.0;
  s.sense_var = 0.1;
  s.rx_noise = 0.5;
  s.fc_power = 1.0;
  s.harvest_eff = 1.0;
  s.circuit_energy = 0.0;
  s.mode = ChannelMode::kNormalized;
  s.trials = 200;
  s.seed = 1;
  return s;
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"fig1", "fig1-alt", "fig2", "fig4", "fig5", "fig6", "table2"};
}

ExperimentSpec preset(const std::string& name) {
  if (name == "fig1" || name == "fig1-alt") {
    ExperimentSpec s = figure_defaults();
    s.name = name;
    s.kind = ExperimentKind::kMseVsIteration;
    s.num_sensors = 5;
    s.sweep = {5, 10, 15, 20};
    if (name == "fig1-alt") s.sense_var = 0.01;  // the companion low-noise variant
    return s;
  }
  if (name == "fig2") {
    ExperimentSpec s = figure_defaults();
    s.name = name;
    s.kind = ExperimentKind::kMseVsNumSensors;
    s.num_fc_antennas = 5;
    s.sweep = {2, 4, 6, 8, 10};
    return s;
  }
  if (name == "fig4") {
    ExperimentSpec s = figure_defaults();
    s.name = name;
    s.kind = ExperimentKind::kPowerVsIteration;
    s.num_sensors = 10;
    s.target_mse = 0.015;
    s.sweep = {5, 10, 15, 20};
    return s;
  }
  if (name == "fig5") {
    ExperimentSpec s = figure_defaults();
    s.name = name;
    s.kind = ExperimentKind::kPowerVsGamma;
    s.num_sensors = 10;
    s.num_fc_antennas = 5;
    s.sweep = {0.015, 0.02, 0.025, 0.03, 0.035, 0.04};
    return s;
  }
  if (name == "fig6") {
    ExperimentSpec s = figure_defaults();
    s.name = name;
    s.kind = ExperimentKind::kTradeoff;
    s.sense_var = 0.01;
    s.sizes = {4, 8};
    s.sweep = {0.01, 0.1, 1.0, 10.0, 100.0, 1000.0};
    return s;
  }
  if (name == "table2") {
    ExperimentSpec s;
    s.name = name;
    s.kind = ExperimentKind::kPowerControlTable;
    s.num_sensors = 7;
    s.num_fc_antennas = 2;
    s.param_var = 1.0;
    s.sense_var = 0.1;
    s.fc_power = dbm_to_watts(30.0);
    s.rx_noise = dbm_to_watts(-103.16);
    s.harvest_eff = 0.51;
    s.circuit_energy = 0.0;
    s.mode = ChannelMode::kPathLoss;
    s.trials = 200;
    s.seed = 1;
    return s;
  }
  throw InvalidArgument("unknown preset: " + name);
}

}  // namespace wpt::sim
