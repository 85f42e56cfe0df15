#pragma once

#include <vector>

#include "wpt/sdp.hpp"
#include "wpt/types.hpp"

namespace wpt::special {

// MSE of the centralized estimator with direct access to every observation;
// the infinite-power floor of every scheme in this library.
double centralized_mse_bound(const Vec& sense_var);

struct SingleAntennaMse {
  CVec amp;
  double mse = 0.0;
  double rank_residual = 0.0;
};

struct SingleAntennaPower {
  CVec amp;
  double fc_power = 0.0;
  double rank_residual = 0.0;
};

// Joint designs for a single-antenna FC. The receive filter is a scalar and
// cancels from the MSE, and the energy beam degenerates to a power level, so
// one compact SDP over the stacked vector [conj(a); t] solves each problem
// globally; no alternation is involved.
SingleAntennaMse single_antenna_mse_min(const NetworkConfig& cfg, const ChannelRealization& ch,
                                        const sdp::ToleranceSet& tol = {});
SingleAntennaPower single_antenna_power_min(const NetworkConfig& cfg,
                                            const ChannelRealization& ch, double target_inv_mse,
                                            const sdp::ToleranceSet& tol = {});

// Colocated sensors drawing from one shared harvester with FC-side channel
// `energy_channel`. The pooled budget makes both problems solvable in closed
// form per filter iterate. Harvest efficiency is folded into the channel
// scale, so the model requires unit efficiency and zero circuit drain.
struct CommonHarvesterConfig {
  NetworkConfig base;
  CVec energy_channel;
  void validate() const;
};

struct HarvesterRun {
  CVec amp;
  CVec beam;
  CVec filter;
  double mse = 0.0;
  double fc_power = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // inverse MSE (ascending) or FC power (descending)
};

struct HarvesterOptions {
  int max_iterations = 200;
  double rel_tol = 1e-10;
  double bisect_rel_tol = 1e-10;
};

HarvesterRun common_harvester_mse_min(const CommonHarvesterConfig& cfg,
                                      const ChannelRealization& ch,
                                      const HarvesterOptions& opts = {});
HarvesterRun common_harvester_power_min(const CommonHarvesterConfig& cfg,
                                        const ChannelRealization& ch, double target_inv_mse,
                                        const HarvesterOptions& opts = {});

struct TradeoffPoint {
  double fc_power = 0.0;
  double mse = 0.0;
};

// Power-distortion frontier of the common-harvester deployment, evaluated by
// running the MSE minimizer at each budget of an ascending positive grid.
std::vector<TradeoffPoint> tradeoff_curve(const CommonHarvesterConfig& cfg,
                                          const ChannelRealization& ch, const Vec& power_grid,
                                          const HarvesterOptions& opts = {});

}  // namespace wpt::special
