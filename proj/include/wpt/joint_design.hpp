#pragma once

#include <string>
#include <vector>

#include "wpt/sdp.hpp"
#include "wpt/types.hpp"

namespace wpt::design {

enum class SdrKind {
  kMseMin,    // minimize estimator MSE under the FC power budget
  kPowerMin,  // minimize FC power under an inverse-MSE floor
};

// One fixed-filter convex subproblem, plus the data needed to recover a
// design and audit optimality certificates afterwards.
//
// Block 0 is the (relaxed) amplification outer product, block 1 the energy
// beam Gram matrix. For kMseMin the inequality rows are the per-sensor energy
// constraints in sensor order followed by the total-power row, and scalar 0
// is the normalization variable of the linear-fractional transform. For
// kPowerMin the inequality rows are the per-sensor energy constraints only.
struct SdrBundle {
  SdrKind kind = SdrKind::kMseMin;
  sdp::SdpProblem problem;
  CVec effective_gain;        // filtered per-sensor gains f_k = v^H h_k
  Vec quad_weight;            // |f_k|^2 * sense_var_k
  double noise_quad = 0.0;    // v^H R_n v
  double fc_power = 0.0;      // total FC budget (kMseMin)
  double target_inv_mse = 0.0;  // required inverse MSE (kPowerMin)
  Vec symbol_power;           // param_var + sense_var_k
  Vec energy_budget_slope;    // harvest efficiency per sensor
  Vec circuit_drain;          // reporting-phase power lost to circuitry
};

SdrBundle build_mse_sdp(const NetworkConfig& cfg, const ChannelRealization& ch, const CVec& filter);

SdrBundle build_power_sdp(const NetworkConfig& cfg, const ChannelRealization& ch,
                          const CVec& filter, double target_inv_mse);

struct RecoveredDesign {
  CVec amp;
  CMat beam_gram;
  double normalization = 0.0;  // kMseMin: the fractional-transform scale
  double objective = 0.0;      // kMseMin: inverse MSE; kPowerMin: FC power [W]
  double rank_residual = 0.0;
};

// Turns a relaxed optimum into an operating design. Throws CertificateFailure
// when the amplification matrix is not numerically rank one (residual above
// 1e-4). The recovered design is projected to exact feasibility, so reported
// objectives are attained, not just approximated.
RecoveredDesign recover_design(const SdrBundle& bundle, const sdp::SdpSolution& sol);

struct CertificateReport {
  double rel_gap = 0.0;
  double comp_slack = 0.0;
  double amp_rank_residual = 0.0;
  int beam_rank = 0;
  int beam_rank_bound = 0;
  double filter_eq_dual = 0.0;     // multiplier of the normalization/target row
  double power_dual = 0.0;         // multiplier of the total-power row (kMseMin)
  double power_equality_gap = 0.0; // | tr(beam Gram) - scale * budget | / budget
  double dual_psd_violation = 0.0; // worst relative negative eigenvalue of dual blocks
  bool gap_ok = false, rank_ok = false, dual_sign_ok = false, power_ok = false,
       comp_ok = false, psd_ok = false;
  bool all_ok() const {
    return gap_ok && rank_ok && dual_sign_ok && power_ok && comp_ok && psd_ok;
  }
};

// Audits a solved bundle against the structural guarantees the relaxation is
// supposed to satisfy at an optimum: small duality gap, tight total power
// with a positive multiplier (kMseMin), PSD dual slacks, complementary
// slackness, rank-one amplification block and a beam Gram of rank at most
// min(n_s, n_r).
CertificateReport verify_certificates(const SdrBundle& bundle, const sdp::SdpSolution& sol);

struct AlternationOptions {
  int max_iterations = 50;
  double rel_tol = 1e-6;
  // Inner solves are pushed well past the final accuracy target so the
  // recorded objective sequence stays monotone to ~1e-9.
  sdp::ToleranceSet inner{1e-10, 1e-10, 1e-7, 1e-9, 100};
  // An inner solve that stalls is still accepted when it meets these.
  sdp::ToleranceSet acceptable{1e-8, 1e-8, 1e-7, 1e-9, 100};
};

struct IterationRecord {
  int iteration = 0;
  double objective = 0.0;  // inverse MSE (ascending) or FC power [W] (descending)
  sdp::Status inner_status = sdp::Status::kOptimal;
};

struct RunTrace {
  std::vector<IterationRecord> steps;
  bool converged = false;
  int iterations = 0;
  sdp::Status status = sdp::Status::kNumericalFailure;
  std::string message;
  DesignPoint design;
  double mse = 0.0;
  double fc_power = 0.0;
  Vec harvested_power;  // reporting-phase power budget per sensor [W]
  Vec transmit_power;   // power each sensor actually radiates [W]
};

// Equal-magnitude, zero-phase amplification that is feasible together with an
// isotropic energy beam; the starting point of both alternating loops.
CVec initial_amplification(const NetworkConfig& cfg, const ChannelRealization& ch);

// Alternates the closed-form receive filter with the fixed-filter SDP.
// optimize_mse drives the estimator MSE down under the FC budget;
// optimize_power drives the FC power down subject to mse <= 1/target_inv_mse.
RunTrace optimize_mse(const NetworkConfig& cfg, const ChannelRealization& ch,
                      const AlternationOptions& opts = {});
RunTrace optimize_power(const NetworkConfig& cfg, const ChannelRealization& ch,
                        double target_inv_mse, const AlternationOptions& opts = {});

struct FeasibilityCheck {
  bool feasible = false;
  double inv_mse_limit = 0.0;  // supremum of attainable inverse MSE
  std::string detail;
};

// Whether an inverse-MSE floor is attainable at any power level. The analytic
// bound is necessary; a trial solve at the initial filter adds a constructive
// sufficiency check when requested.
FeasibilityCheck check_target_feasible(const NetworkConfig& cfg, const ChannelRealization& ch,
                                       double target_inv_mse, bool trial_solve = true);

}  // namespace wpt::design
