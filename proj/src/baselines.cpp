#include <Eigen/Eigenvalues>
#include <cmath>

#include "wpt/baselines.hpp"
#include "wpt/model.hpp"

namespace wpt::baseline {

namespace {

double quotient(const CVec& f, const Vec& quad_weight, double noise_quad, const CVec& amp) {
  const Complex num = f.transpose() * amp;
  return std::norm(num) / (quad_weight.dot(amp.cwiseAbs2()) + noise_quad);
}

bool meets(const sdp::SdpSolution& sol, const sdp::ToleranceSet& tol) {
  return sol.primal_residual <= tol.feasibility && sol.dual_residual <= tol.feasibility &&
         sol.rel_gap <= tol.gap;
}

}  // namespace

void EnergyWeights::validate(int num_sensors) const {
  if (beta.size() != num_sensors) throw InvalidArgument("one energy weight per sensor required");
  if ((beta.array() < 0.0).any()) throw InvalidArgument("energy weights must be nonnegative");
  if (!(beta.maxCoeff() > 0.0)) throw InvalidArgument("energy weights must not all be zero");
}

MseResult suboptimal_mse_min(const NetworkConfig& cfg, const ChannelRealization& ch,
                             const EnergyWeights& weights,
                             const design::AlternationOptions& opts) {
  cfg.validate();
  const int ns = cfg.num_sensors;
  const int nr = cfg.num_fc_antennas;
  EnergyWeights w = weights;
  if (w.beta.size() == 0) w.beta = Vec::Ones(ns);
  w.validate(ns);

  // Phase 1: all power along the direction maximizing weighted harvested
  // energy, i.e. the top eigenvector of the weighted downlink Gram sum.
  CMat gram = CMat::Zero(nr, nr);
  for (int k = 0; k < ns; ++k) {
    const CVec g = ch.downlink.col(k);
    gram += w.beta[k] * (g * g.adjoint());
  }
  Eigen::SelfAdjointEigenSolver<CMat> es(gram);
  const CVec dir = es.eigenvectors().col(nr - 1);
  const CMat beam = cfg.fc_power * (dir * dir.adjoint());

  const Vec budget = available_transmit_power(cfg, ch, beam);
  const Vec symbol = cfg.symbol_power();
  std::vector<int> active;
  for (int k = 0; k < ns; ++k)
    if (budget[k] > 0.0) active.push_back(k);
  if (active.empty())
    throw DegenerateDesign("fixed beam leaves every sensor without transmit energy");
  const int m = static_cast<int>(active.size());

  Vec bud(m), sp(m);
  for (int i = 0; i < m; ++i) {
    bud[i] = budget[active[i]];
    sp[i] = symbol[active[i]];
  }

  MseResult res;
  CVec amp = CVec::Zero(ns);
  for (int i = 0; i < m; ++i)
    amp[active[i]] = std::sqrt(bud[i] / sp[i]);

  {
    const CVec v0 = optimal_filter(cfg, ch, amp);
    const CVec f0 = (ch.uplink.adjoint() * v0).conjugate();
    res.trace.push_back(quotient(f0, f0.cwiseAbs2().cwiseProduct(cfg.sense_var),
                                 std::real(v0.dot(cfg.rx_noise_cov * v0)), amp));
  }

  // Phase 2: alternate the closed-form filter with the fixed-budget
  // amplification subproblem (the joint relaxation minus the beam block).
  double prev = 0.0;
  bool have_prev = false;
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    const CVec v = optimal_filter(cfg, ch, amp);
    const CVec f = (ch.uplink.adjoint() * v).conjugate();
    const Vec quad = f.cwiseAbs2().cwiseProduct(cfg.sense_var);
    const double noise = std::real(v.dot(cfg.rx_noise_cov * v));

    CVec fa(m);
    Vec qa(m);
    for (int i = 0; i < m; ++i) {
      fa[i] = f[active[i]];
      qa[i] = quad[active[i]];
    }

    sdp::SdpProblem p;
    p.block_dims = {m};
    p.num_scalars = 1;
    p.sense = sdp::Sense::kMaximize;
    p.block_names = {"amp_outer"};
    p.scalar_names = {"normalization"};
    p.objective.blocks.push_back({0, fa * fa.adjoint()});
    {
      sdp::Constraint c;
      c.expr.blocks.push_back({0, qa.cast<Complex>().asDiagonal()});
      c.expr.scalars.push_back({0, noise});
      c.rhs = 1.0;
      p.equalities.push_back(std::move(c));
    }
    for (int i = 0; i < m; ++i) {
      sdp::Constraint c;
      CMat coeff = CMat::Zero(m, m);
      coeff(i, i) = sp[i];
      c.expr.blocks.push_back({0, std::move(coeff)});
      c.expr.scalars.push_back({0, -bud[i]});
      c.rhs = 0.0;
      p.inequalities.push_back(std::move(c));
    }

    const sdp::SdpSolution sol = sdp::solve(p, opts.inner);
    if (sol.status != sdp::Status::kOptimal && !meets(sol, opts.acceptable))
      throw CertificateFailure("fixed-budget amplification solve failed: " + sol.message);
    const double scale = sol.scalars[0];
    if (!(scale > 0.0)) throw CertificateFailure("degenerate normalization in baseline solve");
    double residual = 0.0;
    CVec q = sdp::extract_rank_one(CMat(sol.blocks[0] / scale), &residual);
    if (residual > 1e-4)
      throw CertificateFailure("baseline amplification block is not rank one");
    CVec amp_act = q.conjugate();
    for (int i = 0; i < m; ++i) {
      const double used = sp[i] * std::norm(amp_act[i]);
      if (used > bud[i]) amp_act[i] *= std::sqrt(bud[i] / used);
    }
    amp.setZero();
    for (int i = 0; i < m; ++i) amp[active[i]] = amp_act[i];

    const double obj = quotient(f, quad, noise, amp);
    res.trace.push_back(obj);
    res.iterations = iter;
    if (have_prev && std::abs(obj - prev) <= opts.rel_tol * std::abs(obj)) {
      res.converged = true;
      break;
    }
    prev = obj;
    have_prev = true;
  }

  res.design.amp = amp;
  res.design.beam_gram = beam;
  res.design.filter = optimal_filter(cfg, ch, amp);
  res.mse = estimator_mse(cfg, ch, res.design);
  return res;
}

PowerResult suboptimal_power_min(const NetworkConfig& cfg, const ChannelRealization& ch,
                                 double target_inv_mse,
                                 const design::AlternationOptions& opts) {
  cfg.validate();
  if (!(target_inv_mse > 0.0)) throw InvalidArgument("target_inv_mse must be positive");
  const int ns = cfg.num_sensors;
  const int nr = cfg.num_fc_antennas;
  const double hard_limit = cfg.sense_var.cwiseInverse().sum();
  if (!(target_inv_mse < hard_limit))
    throw InfeasibleTarget("target inverse MSE " + std::to_string(target_inv_mse) +
                           " is not below the infinite-power limit " +
                           std::to_string(hard_limit));

  const Vec symbol = cfg.symbol_power();
  const Vec inv_sqrt = symbol.cwiseSqrt().cwiseInverse();

  PowerResult res;

  // Phase 1: cheapest sensor powers meeting the target, with the filter and
  // the Rayleigh-quotient amplification updated in turn.
  CVec amp = inv_sqrt.cast<Complex>();
  double prev = 0.0;
  bool have_prev = false;
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    const CVec v = optimal_filter(cfg, ch, amp);
    const CVec f = (ch.uplink.adjoint() * v).conjugate();
    const Vec quad = f.cwiseAbs2().cwiseProduct(cfg.sense_var);
    const double noise = std::real(v.dot(cfg.rx_noise_cov * v));

    CMat m = f * f.adjoint();
    m -= target_inv_mse * CMat(quad.cast<Complex>().asDiagonal());
    m = inv_sqrt.cast<Complex>().asDiagonal() * m * inv_sqrt.cast<Complex>().asDiagonal();
    Eigen::SelfAdjointEigenSolver<CMat> es(m);
    const double top = es.eigenvalues()[ns - 1];
    if (!(top > 0.0))
      throw InfeasibleTarget("target unattainable under the current filter");
    const double power = target_inv_mse * noise / top;
    amp = std::sqrt(power) * inv_sqrt.cast<Complex>().cwiseProduct(
                                 es.eigenvectors().col(ns - 1).conjugate());

    res.trace.push_back(power);
    res.iterations = iter;
    res.sensor_power = power;
    if (have_prev && std::abs(power - prev) <= opts.rel_tol * power) {
      res.converged = true;
      break;
    }
    prev = power;
    have_prev = true;
  }

  // Phase 2: minimum-power beam funding the phase-1 amplification.
  Vec required(ns);
  for (int k = 0; k < ns; ++k) {
    required[k] =
        (symbol[k] * std::norm(amp[k]) + 2.0 * cfg.circuit_energy[k]) / cfg.harvest_eff[k];
    const double g2 = ch.downlink.col(k).squaredNorm();
    if (!(g2 > 0.0) && required[k] > 0.0)
      throw InfeasibleTarget("sensor with zero downlink channel cannot be funded");
  }

  sdp::SdpProblem p;
  p.block_dims = {nr};
  p.sense = sdp::Sense::kMinimize;
  p.block_names = {"beam_gram"};
  p.objective.blocks.push_back({0, CMat::Identity(nr, nr)});
  for (int k = 0; k < ns; ++k) {
    sdp::Constraint c;
    const CVec g = ch.downlink.col(k);
    c.expr.blocks.push_back({0, -(g * g.adjoint())});
    c.rhs = -required[k];
    p.inequalities.push_back(std::move(c));
  }
  const sdp::SdpSolution sol = sdp::solve(p, opts.inner);
  if (sol.status != sdp::Status::kOptimal && !meets(sol, opts.acceptable))
    throw CertificateFailure("beam power solve failed: " + sol.message);

  CMat beam = detail::hermitian_part(sol.blocks[0]);
  double grow = 1.0;
  for (int k = 0; k < ns; ++k) {
    if (!(required[k] > 0.0)) continue;
    const CVec g = ch.downlink.col(k);
    const double got = std::real(g.dot(beam * g));
    if (!(got > 0.0)) throw CertificateFailure("beam delivers no energy to a funded sensor");
    grow = std::max(grow, required[k] / got);
  }
  beam *= grow;

  res.design.amp = amp;
  res.design.beam_gram = beam;
  res.design.filter = optimal_filter(cfg, ch, amp);
  res.fc_power = std::real(beam.trace());
  return res;
}

}  // namespace wpt::baseline
