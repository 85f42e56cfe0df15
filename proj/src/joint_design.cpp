#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

#include "wpt/joint_design.hpp"
#include "wpt/model.hpp"

namespace wpt::design {

namespace {

constexpr double kRankResidualTol = 1e-4;

struct FilterData {
  CVec gain;        // f_k = v^H h_k
  Vec quad_weight;  // |f_k|^2 sense_var_k
  double noise_quad;
};

FilterData filter_data(const NetworkConfig& cfg, const ChannelRealization& ch, const CVec& v) {
  if (v.size() != cfg.num_fc_antennas)
    throw InvalidArgument("filter must have one entry per FC antenna");
  FilterData fd;
  fd.gain = (ch.uplink.adjoint() * v).conjugate();
  if (!(fd.gain.norm() > 0.0))
    throw DegenerateDesign("filter is orthogonal to every sensor channel");
  fd.quad_weight = fd.gain.cwiseAbs2().cwiseProduct(cfg.sense_var);
  fd.noise_quad = std::real(v.dot(cfg.rx_noise_cov * v));
  return fd;
}

// Inverse-MSE quotient of an amplification vector under a fixed filter.
double quotient(const FilterData& fd, const CVec& amp) {
  const Complex num = fd.gain.transpose() * amp;
  const double den = fd.quad_weight.dot(amp.cwiseAbs2()) + fd.noise_quad;
  return std::norm(num) / den;
}

CMat sparse_diag(int n, int k, double value) {
  CMat m = CMat::Zero(n, n);
  m(k, k) = value;
  return m;
}

bool meets(const sdp::SdpSolution& sol, const sdp::ToleranceSet& tol) {
  return sol.primal_residual <= tol.feasibility && sol.dual_residual <= tol.feasibility &&
         sol.rel_gap <= tol.gap;
}

}  // namespace

SdrBundle build_mse_sdp(const NetworkConfig& cfg, const ChannelRealization& ch,
                        const CVec& filter) {
  cfg.validate();
  const FilterData fd = filter_data(cfg, ch, filter);
  const int ns = cfg.num_sensors;
  const int nr = cfg.num_fc_antennas;

  SdrBundle b;
  b.kind = SdrKind::kMseMin;
  b.effective_gain = fd.gain;
  b.quad_weight = fd.quad_weight;
  b.noise_quad = fd.noise_quad;
  b.fc_power = cfg.fc_power;
  b.symbol_power = cfg.symbol_power();
  b.energy_budget_slope = cfg.harvest_eff;
  b.circuit_drain = 2.0 * cfg.circuit_energy;

  sdp::SdpProblem& p = b.problem;
  p.block_dims = {ns, nr};
  p.num_scalars = 1;
  p.sense = sdp::Sense::kMaximize;
  p.block_names = {"amp_outer", "beam_gram"};
  p.scalar_names = {"normalization"};

  // Objective: signal power through the filter.
  p.objective.blocks.push_back({0, fd.gain * fd.gain.adjoint()});

  // Normalization of the linear-fractional transform: amplified-noise power
  // plus scaled receiver noise equals one.
  {
    sdp::Constraint c;
    c.expr.blocks.push_back({0, fd.quad_weight.cast<Complex>().asDiagonal()});
    c.expr.scalars.push_back({0, fd.noise_quad});
    c.rhs = 1.0;
    p.equalities.push_back(std::move(c));
  }
  // Per-sensor energy causality: transmit power within harvested budget.
  for (int k = 0; k < ns; ++k) {
    sdp::Constraint c;
    c.expr.blocks.push_back({0, sparse_diag(ns, k, b.symbol_power[k])});
    const CVec g = ch.downlink.col(k);
    c.expr.blocks.push_back({1, -b.energy_budget_slope[k] * (g * g.adjoint())});
    if (b.circuit_drain[k] != 0.0) c.expr.scalars.push_back({0, b.circuit_drain[k]});
    c.rhs = 0.0;
    p.inequalities.push_back(std::move(c));
  }
  // Total FC transmit power.
  {
    sdp::Constraint c;
    c.expr.blocks.push_back({1, CMat::Identity(nr, nr)});
    c.expr.scalars.push_back({0, -cfg.fc_power});
    c.rhs = 0.0;
    p.inequalities.push_back(std::move(c));
  }
  return b;
}

SdrBundle build_power_sdp(const NetworkConfig& cfg, const ChannelRealization& ch,
                          const CVec& filter, double target_inv_mse) {
  cfg.validate();
  if (!(target_inv_mse > 0.0)) throw InvalidArgument("target_inv_mse must be positive");
  const FilterData fd = filter_data(cfg, ch, filter);
  const int ns = cfg.num_sensors;
  const int nr = cfg.num_fc_antennas;

  SdrBundle b;
  b.kind = SdrKind::kPowerMin;
  b.effective_gain = fd.gain;
  b.quad_weight = fd.quad_weight;
  b.noise_quad = fd.noise_quad;
  b.target_inv_mse = target_inv_mse;
  b.symbol_power = cfg.symbol_power();
  b.energy_budget_slope = cfg.harvest_eff;
  b.circuit_drain = 2.0 * cfg.circuit_energy;

  sdp::SdpProblem& p = b.problem;
  p.block_dims = {ns, nr};
  p.num_scalars = 0;
  p.sense = sdp::Sense::kMinimize;
  p.block_names = {"amp_outer", "beam_gram"};

  p.objective.blocks.push_back({1, CMat::Identity(nr, nr)});

  // Inverse MSE pinned to the target: signal power equals target times
  // (amplified-noise power + receiver noise).
  {
    sdp::Constraint c;
    CMat coeff = fd.gain * fd.gain.adjoint();
    coeff -= target_inv_mse * CMat(fd.quad_weight.cast<Complex>().asDiagonal());
    c.expr.blocks.push_back({0, std::move(coeff)});
    c.rhs = target_inv_mse * fd.noise_quad;
    p.equalities.push_back(std::move(c));
  }
  for (int k = 0; k < ns; ++k) {
    sdp::Constraint c;
    c.expr.blocks.push_back({0, sparse_diag(ns, k, b.symbol_power[k])});
    const CVec g = ch.downlink.col(k);
    c.expr.blocks.push_back({1, -b.energy_budget_slope[k] * (g * g.adjoint())});
    c.rhs = -b.circuit_drain[k];
    p.inequalities.push_back(std::move(c));
  }
  return b;
}

RecoveredDesign recover_design(const SdrBundle& bundle, const sdp::SdpSolution& sol) {
  if (sol.blocks.size() != 2) throw InvalidArgument("solution does not match the bundle");
  RecoveredDesign rd;

  CMat amp_outer = sol.blocks[0];
  CMat beam = sol.blocks[1];
  if (bundle.kind == SdrKind::kMseMin) {
    const double scale = sol.scalars[0];
    if (!(scale > 0.0))
      throw CertificateFailure("normalization scale is not positive; transform not invertible");
    amp_outer /= scale;
    beam /= scale;
    rd.normalization = scale;
  }

  CVec q = sdp::extract_rank_one(amp_outer, &rd.rank_residual);
  if (rd.rank_residual > kRankResidualTol)
    throw CertificateFailure("amplification block is not rank one: residual " +
                             std::to_string(rd.rank_residual));
  CVec amp = q.conjugate();  // the relaxed block is conj(a) a^T
  beam = detail::hermitian_part(beam);

  const int ns = static_cast<int>(amp.size());
  const FilterData fd{bundle.effective_gain, bundle.quad_weight, bundle.noise_quad};

  if (bundle.kind == SdrKind::kMseMin) {
    // Project to exact feasibility: tiny solver slack must not leak into
    // reported designs (energy causality and the FC budget hold exactly).
    const double total = std::real(beam.trace());
    if (total > bundle.fc_power) beam *= bundle.fc_power / total;
    double shrink = 1.0;
    for (int k = 0; k < ns; ++k) {
      const auto& expr = bundle.problem.inequalities[k].expr;
      // expr: symbol_power_k on block 0 diag + (-slope * G_k) on block 1.
      double harvested = 0.0;
      for (const auto& bt : expr.blocks)
        if (bt.block == 1) harvested = -std::real((bt.coeff * beam).trace());
      const double budget = harvested - bundle.circuit_drain[k];
      const double used = bundle.symbol_power[k] * std::norm(amp[k]);
      if (used > budget && used > 0.0) {
        if (budget <= 0.0)
          throw CertificateFailure("recovered design violates energy causality");
        shrink = std::min(shrink, std::sqrt(budget / used));
      }
    }
    amp *= shrink;
    rd.objective = quotient(fd, amp);
  } else {
    // Rescale so the inverse-MSE target holds with equality, then recompute
    // the exact FC power for the rescaled design.
    const Complex num = fd.gain.transpose() * amp;
    const double signal = std::norm(num);
    const double noise = fd.quad_weight.dot(amp.cwiseAbs2());
    const double margin = signal - bundle.target_inv_mse * noise;
    if (!(margin > 0.0))
      throw CertificateFailure("recovered amplification cannot reach the target");
    const double t2 = bundle.target_inv_mse * fd.noise_quad / margin;
    amp *= std::sqrt(t2);
    // Grow the beam just enough that every energy constraint holds after the
    // rescale; binding constraints keep the objective change at solver-slack
    // scale.
    double needed = 1.0;
    for (int k = 0; k < ns; ++k) {
      const auto& expr = bundle.problem.inequalities[k].expr;
      double harvested = 0.0;
      for (const auto& bt : expr.blocks)
        if (bt.block == 1) harvested = -std::real((bt.coeff * beam).trace());
      const double budget = harvested - bundle.circuit_drain[k];
      const double used = bundle.symbol_power[k] * std::norm(amp[k]);
      if (used > budget) {
        if (!(harvested > 0.0))
          throw CertificateFailure("recovered design violates energy causality");
        needed = std::max(needed, (used + bundle.circuit_drain[k]) / harvested);
      }
    }
    beam *= needed;
    rd.objective = std::real(beam.trace());
  }

  rd.amp = std::move(amp);
  rd.beam_gram = std::move(beam);
  return rd;
}

CertificateReport verify_certificates(const SdrBundle& bundle, const sdp::SdpSolution& sol) {
  CertificateReport rep;
  rep.rel_gap = sol.rel_gap;
  rep.comp_slack = sol.comp_slack;

  sdp::extract_rank_one(sol.blocks[0], &rep.amp_rank_residual);

  const CMat& beam = sol.blocks[1];
  Eigen::SelfAdjointEigenSolver<CMat> es(detail::hermitian_part(beam), Eigen::EigenvaluesOnly);
  const double lead = es.eigenvalues().maxCoeff();
  int rank = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > 1e-6 * lead) ++rank;
  rep.beam_rank = rank;
  rep.beam_rank_bound = static_cast<int>(std::min(sol.blocks[0].rows(), sol.blocks[1].rows()));

  double psd_violation = 0.0;
  for (const auto& s : sol.dual_blocks) {
    Eigen::SelfAdjointEigenSolver<CMat> des(detail::hermitian_part(s), Eigen::EigenvaluesOnly);
    const double lo = des.eigenvalues().minCoeff();
    if (lo < 0.0) psd_violation = std::max(psd_violation, -lo / (1.0 + s.norm()));
  }
  for (int j = 0; j < sol.dual_scalars.size(); ++j)
    if (sol.dual_scalars[j] < 0.0)
      psd_violation = std::max(psd_violation, -sol.dual_scalars[j]);
  rep.dual_psd_violation = psd_violation;

  if (bundle.kind == SdrKind::kMseMin) {
    rep.filter_eq_dual = sol.eq_duals[0];
    const int power_row = static_cast<int>(sol.ineq_duals.size()) - 1;
    rep.power_dual = sol.ineq_duals[power_row];
    const double scale = sol.scalars[0];
    rep.power_equality_gap =
        std::abs(std::real(sol.blocks[1].trace()) - scale * bundle.fc_power) / bundle.fc_power;
    rep.dual_sign_ok = rep.filter_eq_dual > 0.0 && rep.power_dual > 0.0;
    rep.power_ok = rep.power_equality_gap <= 1e-6;
  } else {
    // For the minimization the reported equality dual carries the opposite
    // sign of the multiplier in the natural Lagrangian of this problem.
    rep.filter_eq_dual = -sol.eq_duals[0];
    rep.power_dual = 0.0;
    rep.power_equality_gap = 0.0;
    rep.dual_sign_ok = rep.filter_eq_dual > 0.0;
    rep.power_ok = true;
  }

  rep.gap_ok = sol.status == sdp::Status::kOptimal && rep.rel_gap <= 1e-7;
  rep.rank_ok =
      rep.amp_rank_residual <= kRankResidualTol && rep.beam_rank <= rep.beam_rank_bound;
  rep.comp_ok = rep.comp_slack <= 1e-6;
  rep.psd_ok = rep.dual_psd_violation <= 1e-9;
  return rep;
}

CVec initial_amplification(const NetworkConfig& cfg, const ChannelRealization& ch) {
  cfg.validate();
  const int ns = cfg.num_sensors;
  const int nr = cfg.num_fc_antennas;
  const CMat isotropic = (cfg.fc_power / nr) * CMat::Identity(nr, nr);
  const Vec budget = available_transmit_power(cfg, ch, isotropic);
  const Vec symbol = cfg.symbol_power();
  double amp2 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < ns; ++k) amp2 = std::min(amp2, budget[k] / symbol[k]);
  if (!(amp2 > 0.0))
    throw DegenerateDesign("no amplification is feasible under an isotropic energy beam");
  return CVec::Constant(ns, Complex(std::sqrt(amp2), 0.0));
}

namespace {

// Scale- and phase-free representative of a receive filter, so differences of
// consecutive iterates measure genuine movement of the filter direction.
CVec filter_direction(const CVec& v) {
  int lead = 0;
  for (int i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[lead])) lead = i;
  return v / v.norm() * std::polar(1.0, -std::arg(v[lead]));
}

RunTrace alternate(const NetworkConfig& cfg, const ChannelRealization& ch,
                   const AlternationOptions& opts, SdrKind kind, double target_inv_mse) {
  RunTrace trace;
  CVec amp = initial_amplification(cfg, ch);
  CMat beam = (cfg.fc_power / cfg.num_fc_antennas) *
              CMat::Identity(cfg.num_fc_antennas, cfg.num_fc_antennas);

  double prev = 0.0;
  bool have_prev = false;
  if (kind == SdrKind::kMseMin) {
    const CVec v0 = optimal_filter(cfg, ch, amp);
    const FilterData fd0 = filter_data(cfg, ch, v0);
    prev = quotient(fd0, amp);
    have_prev = true;
    trace.steps.push_back({0, prev, sdp::Status::kOptimal});
  }

  struct InnerResult {
    bool ok = false;
    sdp::Status status = sdp::Status::kNumericalFailure;
    RecoveredDesign rec;
    std::string error;
  };
  const auto inner = [&](const CVec& filter) {
    InnerResult out;
    SdrBundle bundle = kind == SdrKind::kMseMin
                           ? build_mse_sdp(cfg, ch, filter)
                           : build_power_sdp(cfg, ch, filter, target_inv_mse);
    sdp::SdpSolution sol = sdp::solve(bundle.problem, opts.inner);
    out.status = sol.status;
    if (!(sol.status == sdp::Status::kOptimal || meets(sol, opts.acceptable))) {
      out.error = "inner solve failed: " + sol.message;
      return out;
    }
    try {
      out.rec = recover_design(bundle, sol);
    } catch (const CertificateFailure& e) {
      out.status = sdp::Status::kNumericalFailure;
      out.error = e.what();
      return out;
    }
    out.ok = true;
    return out;
  };

  // The filter sequence contracts linearly toward its fixed point, so once
  // the contraction factor looks stable the remaining geometric tail can be
  // summed in one extrapolated trial step. The trial is accepted only when
  // its exact recovered objective improves on the last recorded value, which
  // keeps the trace monotone no matter how wrong the extrapolation was.
  CVec dir_prev, delta_prev;
  double rho_prev = -1.0;
  int plain_streak = 0;

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    CVec filter;
    try {
      filter = optimal_filter(cfg, ch, amp);
    } catch (const DegenerateDesign&) {
      trace.status = sdp::Status::kNumericalFailure;
      trace.message = "filter update degenerated";
      break;
    }

    const CVec dir = filter_direction(filter);
    CVec delta;
    double rho = -1.0;
    if (plain_streak >= 1) delta = dir - dir_prev;
    if (plain_streak >= 2 && delta_prev.norm() > 0.0) rho = delta.norm() / delta_prev.norm();

    // Two trial regimes: a stable contraction factor sums the geometric tail
    // (classic fixed-point extrapolation); a factor creeping through 1 means
    // the iterate is skirting a saddle, where a long jump along the current
    // movement direction hops past it.
    const bool contracting =
        rho > 0.3 && rho < 0.98 && rho_prev > 0.0 && std::abs(rho - rho_prev) < 0.15 * rho;
    const bool stalled = rho >= 0.98 && rho <= 1.15 && rho_prev >= 0.9;
    bool stepped = false;
    if (have_prev && (contracting || stalled)) {
      const double mult = contracting ? std::min(rho / (1.0 - rho), 25.0) : 25.0;
      const CVec cand = dir + mult * delta;
      if (cand.norm() > 1e-8) {
        const InnerResult trial = inner(cand.normalized());
        const bool improves = trial.ok && (kind == SdrKind::kMseMin
                                               ? trial.rec.objective > prev
                                               : trial.rec.objective < prev);
        if (improves) {
          amp = trial.rec.amp;
          beam = trial.rec.beam_gram;
          trace.steps.push_back({iter, trial.rec.objective, trial.status});
          trace.status = sdp::Status::kOptimal;
          trace.iterations = iter;
          if (std::abs(trial.rec.objective - prev) <=
              opts.rel_tol * std::abs(trial.rec.objective)) {
            trace.converged = true;
            break;
          }
          prev = trial.rec.objective;
          dir_prev.resize(0);
          delta_prev.resize(0);
          plain_streak = 0;
          stepped = true;
        }
        rho_prev = -1.0;  // accepted or not, demand fresh contraction evidence
      }
    }
    if (stepped) continue;

    const double incumbent =
        kind == SdrKind::kMseMin ? quotient(filter_data(cfg, ch, filter), amp) : prev;
    const InnerResult plain = inner(filter);
    if (!plain.ok) {
      trace.status = plain.status;
      trace.message = plain.error;
      trace.steps.push_back({iter, 0.0, plain.status});
      break;
    }
    const RecoveredDesign& rec = plain.rec;

    // Safeguarded step: the incumbent design stays feasible under the fresh
    // filter, so if solver slack makes the recovered candidate measure worse,
    // keep the incumbent and stop. The exact objective never moves backwards.
    const bool retain = have_prev && (kind == SdrKind::kMseMin ? rec.objective < incumbent
                                                               : rec.objective > incumbent);
    if (retain) {
      trace.steps.push_back({iter, incumbent, plain.status});
      trace.status = sdp::Status::kOptimal;
      trace.iterations = iter;
      trace.converged = true;
      break;
    }

    amp = rec.amp;
    beam = rec.beam_gram;
    trace.steps.push_back({iter, rec.objective, plain.status});
    trace.status = sdp::Status::kOptimal;
    trace.iterations = iter;

    if (have_prev && std::abs(rec.objective - prev) <= opts.rel_tol * std::abs(rec.objective)) {
      trace.converged = true;
      break;
    }
    prev = rec.objective;
    have_prev = true;
    if (plain_streak >= 1) delta_prev = delta;
    if (rho > 0.0) rho_prev = rho;
    dir_prev = dir;
    ++plain_streak;
  }

  if (trace.status == sdp::Status::kOptimal) {
    trace.design.amp = amp;
    trace.design.beam_gram = beam;
    trace.design.filter = optimal_filter(cfg, ch, amp);
    trace.mse = estimator_mse(cfg, ch, trace.design);
    trace.fc_power = std::real(beam.trace());
    trace.harvested_power = available_transmit_power(cfg, ch, beam);
    trace.transmit_power = sensor_transmit_power(cfg, amp);
  }
  return trace;
}

}  // namespace

RunTrace optimize_mse(const NetworkConfig& cfg, const ChannelRealization& ch,
                      const AlternationOptions& opts) {
  return alternate(cfg, ch, opts, SdrKind::kMseMin, 0.0);
}

RunTrace optimize_power(const NetworkConfig& cfg, const ChannelRealization& ch,
                        double target_inv_mse, const AlternationOptions& opts) {
  const FeasibilityCheck fc = check_target_feasible(cfg, ch, target_inv_mse, false);
  if (!fc.feasible) throw InfeasibleTarget(fc.detail);
  return alternate(cfg, ch, opts, SdrKind::kPowerMin, target_inv_mse);
}

FeasibilityCheck check_target_feasible(const NetworkConfig& cfg, const ChannelRealization& ch,
                                       double target_inv_mse, bool trial_solve) {
  cfg.validate();
  if (!(target_inv_mse > 0.0)) throw InvalidArgument("target_inv_mse must be positive");
  FeasibilityCheck out;
  out.inv_mse_limit = cfg.sense_var.cwiseInverse().sum();
  if (target_inv_mse >= out.inv_mse_limit) {
    out.feasible = false;
    out.detail = "target exceeds the infinite-power limit " + std::to_string(out.inv_mse_limit);
    return out;
  }
  out.feasible = true;
  out.detail = "target below the infinite-power limit";
  if (trial_solve) {
    try {
      const CVec amp = initial_amplification(cfg, ch);
      const CVec filter = optimal_filter(cfg, ch, amp);
      SdrBundle bundle = build_power_sdp(cfg, ch, filter, target_inv_mse);
      sdp::SdpSolution sol = sdp::solve(bundle.problem);
      if (sol.status == sdp::Status::kOptimal) {
        out.detail += "; confirmed by a trial solve at the initial filter";
      } else if (sol.status == sdp::Status::kInfeasible) {
        out.detail += "; trial solve at the initial filter was infeasible (filter-limited)";
      } else {
        out.detail += "; trial solve inconclusive";
      }
    } catch (const std::exception& e) {
      out.detail += std::string("; trial solve errored: ") + e.what();
    }
  }
  return out;
}

}  // namespace wpt::design
