#pragma once

#include <vector>

#include "wpt/joint_design.hpp"
#include "wpt/types.hpp"

namespace wpt::baseline {

// Per-sensor energy priorities for the two-phase MSE design. Sensors with
// weaker channels can be weighted up to restore fairness.
struct EnergyWeights {
  Vec beta;
  void validate(int num_sensors) const;
};

struct MseResult {
  DesignPoint design;
  double mse = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // inverse MSE per amplification update
};

// Two-phase MSE minimizer: beam all FC power along the direction that
// maximizes weighted total harvested energy, then alternate receive filters
// with amplification under the resulting fixed per-sensor budgets. Cheaper
// than the joint design and never better: the frozen beam only restricts the
// feasible set.
MseResult suboptimal_mse_min(const NetworkConfig& cfg, const ChannelRealization& ch,
                             const EnergyWeights& weights = {},
                             const design::AlternationOptions& opts = {});

struct PowerResult {
  DesignPoint design;
  double fc_power = 0.0;
  double sensor_power = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // total sensor transmit power per update
};

// Two-phase power minimizer: first find the cheapest sensor powers that meet
// the distortion target (closed-form Rayleigh-quotient iteration), then beam
// the least FC power that funds them.
PowerResult suboptimal_power_min(const NetworkConfig& cfg, const ChannelRealization& ch,
                                 double target_inv_mse,
                                 const design::AlternationOptions& opts = {});

}  // namespace wpt::baseline
