#include <Eigen/Eigenvalues>
#include <cmath>

#include "wpt/model.hpp"
#include "wpt/special_cases.hpp"

namespace wpt::special {

namespace {

CMat sparse_diag(int n, int k, double value) {
  CMat m = CMat::Zero(n, n);
  m(k, k) = value;
  return m;
}

double quotient(const CVec& f, const Vec& quad_weight, double noise_quad, const CVec& amp) {
  const Complex num = f.transpose() * amp;
  return std::norm(num) / (quad_weight.dot(amp.cwiseAbs2()) + noise_quad);
}

struct ScalarFcData {
  CVec gain;        // f_k = h_k for the unit scalar filter
  Vec quad_weight;  // |h_k|^2 sense_var_k
  double noise_quad;
};

ScalarFcData scalar_fc_data(const NetworkConfig& cfg, const ChannelRealization& ch) {
  cfg.validate();
  if (cfg.num_fc_antennas != 1)
    throw InvalidArgument("single-antenna designs require exactly one FC antenna");
  ScalarFcData d;
  d.gain = ch.uplink.row(0).transpose();
  if (!(d.gain.norm() > 0.0)) throw DegenerateDesign("uplink channel is identically zero");
  d.quad_weight = d.gain.cwiseAbs2().cwiseProduct(cfg.sense_var);
  d.noise_quad = std::real(cfg.rx_noise_cov(0, 0));
  return d;
}

}  // namespace

double centralized_mse_bound(const Vec& sense_var) {
  if (sense_var.size() == 0 || (sense_var.array() <= 0.0).any())
    throw InvalidArgument("sense_var must be positive and nonempty");
  return 1.0 / sense_var.cwiseInverse().sum();
}

SingleAntennaMse single_antenna_mse_min(const NetworkConfig& cfg, const ChannelRealization& ch,
                                        const sdp::ToleranceSet& tol) {
  const ScalarFcData d = scalar_fc_data(cfg, ch);
  const int ns = cfg.num_sensors;
  const Vec symbol = cfg.symbol_power();
  const CMat full_power = CMat::Identity(1, 1) * cfg.fc_power;
  const Vec budget = available_transmit_power(cfg, ch, full_power);

  std::vector<int> active;
  for (int k = 0; k < ns; ++k)
    if (budget[k] > 0.0) active.push_back(k);
  if (active.empty())
    throw DegenerateDesign("no sensor can transmit: every harvested budget is nonpositive");
  const int m = static_cast<int>(active.size());

  CVec f(m);
  Vec quad(m), sp(m), bud(m);
  for (int i = 0; i < m; ++i) {
    f[i] = d.gain[active[i]];
    quad[i] = d.quad_weight[active[i]];
    sp[i] = symbol[active[i]];
    bud[i] = budget[active[i]];
  }

  // One (m+1)-dimensional block over the stacked vector [conj(a); t]; the
  // corner variable t^2 carries the normalization of the fractional program.
  sdp::SdpProblem p;
  p.block_dims = {m + 1};
  p.sense = sdp::Sense::kMaximize;
  p.block_names = {"stacked_outer"};
  {
    CMat obj = CMat::Zero(m + 1, m + 1);
    obj.topLeftCorner(m, m) = f * f.adjoint();
    p.objective.blocks.push_back({0, std::move(obj)});
  }
  {
    sdp::Constraint c;
    CMat coeff = CMat::Zero(m + 1, m + 1);
    coeff.topLeftCorner(m, m) = quad.cast<Complex>().asDiagonal();
    coeff(m, m) = d.noise_quad;
    c.expr.blocks.push_back({0, std::move(coeff)});
    c.rhs = 1.0;
    p.equalities.push_back(std::move(c));
  }
  for (int i = 0; i < m; ++i) {
    sdp::Constraint c;
    CMat coeff = sparse_diag(m + 1, i, sp[i]);
    coeff(m, m) = -bud[i];
    c.expr.blocks.push_back({0, std::move(coeff)});
    c.rhs = 0.0;
    p.inequalities.push_back(std::move(c));
  }

  const sdp::SdpSolution sol = sdp::solve(p, tol);
  if (sol.status != sdp::Status::kOptimal)
    throw CertificateFailure("single-antenna solve did not reach optimality: " + sol.message);

  // The data are block diagonal in {sensors} x {corner}, so the interior
  // solution is too; rank-one structure lives in the leading block.
  SingleAntennaMse out;
  const CMat lead = sol.blocks[0].topLeftCorner(m, m);
  const CVec q = sdp::extract_rank_one(lead, &out.rank_residual);
  if (out.rank_residual > 1e-4)
    throw CertificateFailure("stacked relaxation is not rank one: residual " +
                             std::to_string(out.rank_residual));
  const double t2 = std::real(sol.blocks[0](m, m));
  if (!(t2 > 0.0)) throw CertificateFailure("degenerate normalization in the stacked solution");

  CVec amp_active = q.conjugate() / std::sqrt(t2);
  for (int i = 0; i < m; ++i) {
    const double used = sp[i] * std::norm(amp_active[i]);
    if (used > bud[i]) amp_active[i] *= std::sqrt(bud[i] / used);
  }
  out.amp = CVec::Zero(ns);
  for (int i = 0; i < m; ++i) out.amp[active[i]] = amp_active[i];
  out.mse = 1.0 / quotient(d.gain, d.quad_weight, d.noise_quad, out.amp);
  return out;
}

SingleAntennaPower single_antenna_power_min(const NetworkConfig& cfg,
                                            const ChannelRealization& ch, double target_inv_mse,
                                            const sdp::ToleranceSet& tol) {
  const ScalarFcData d = scalar_fc_data(cfg, ch);
  if (!(target_inv_mse > 0.0)) throw InvalidArgument("target_inv_mse must be positive");
  const int ns = cfg.num_sensors;
  const Vec symbol = cfg.symbol_power();

  double limit = 0.0;
  for (int k = 0; k < ns; ++k)
    if (std::norm(d.gain[k]) > 0.0) limit += 1.0 / cfg.sense_var[k];
  if (!(target_inv_mse < limit))
    throw InfeasibleTarget("target inverse MSE " + std::to_string(target_inv_mse) +
                           " is not below the attainable limit " + std::to_string(limit));

  Vec gain2(ns);
  for (int k = 0; k < ns; ++k) gain2[k] = std::norm(ch.downlink(0, k));
  for (int k = 0; k < ns; ++k)
    if (!(gain2[k] > 0.0) && cfg.circuit_energy[k] > 0.0)
      throw InfeasibleTarget("sensor with zero downlink gain cannot cover its circuit drain");

  // The corner variable is the FC transmit power itself.
  sdp::SdpProblem p;
  p.block_dims = {ns + 1};
  p.sense = sdp::Sense::kMinimize;
  p.block_names = {"stacked_outer"};
  {
    CMat obj = CMat::Zero(ns + 1, ns + 1);
    obj(ns, ns) = 1.0;
    p.objective.blocks.push_back({0, std::move(obj)});
  }
  {
    sdp::Constraint c;
    CMat coeff = CMat::Zero(ns + 1, ns + 1);
    coeff.topLeftCorner(ns, ns) =
        d.gain * d.gain.adjoint() -
        CMat(Vec(target_inv_mse * d.quad_weight).cast<Complex>().asDiagonal());
    c.expr.blocks.push_back({0, std::move(coeff)});
    c.rhs = target_inv_mse * d.noise_quad;
    p.equalities.push_back(std::move(c));
  }
  for (int k = 0; k < ns; ++k) {
    sdp::Constraint c;
    CMat coeff = sparse_diag(ns + 1, k, symbol[k]);
    coeff(ns, ns) = -cfg.harvest_eff[k] * gain2[k];
    c.expr.blocks.push_back({0, std::move(coeff)});
    c.rhs = -2.0 * cfg.circuit_energy[k];
    p.inequalities.push_back(std::move(c));
  }

  const sdp::SdpSolution sol = sdp::solve(p, tol);
  if (sol.status == sdp::Status::kInfeasible)
    throw InfeasibleTarget("no power level meets the target for this channel");
  if (sol.status != sdp::Status::kOptimal)
    throw CertificateFailure("single-antenna power solve failed: " + sol.message);

  SingleAntennaPower out;
  const CMat lead = sol.blocks[0].topLeftCorner(ns, ns);
  CVec q = sdp::extract_rank_one(lead, &out.rank_residual);
  if (out.rank_residual > 1e-4)
    throw CertificateFailure("stacked relaxation is not rank one: residual " +
                             std::to_string(out.rank_residual));

  // Rescale for exact target attainment, then charge the smallest power that
  // still funds every sensor.
  const double signal = std::norm(Complex(d.gain.transpose() * q.conjugate()));
  const double noise = d.quad_weight.dot(q.cwiseAbs2());
  const double margin = signal - target_inv_mse * noise;
  if (!(margin > 0.0))
    throw CertificateFailure("recovered amplification cannot reach the target");
  q *= std::sqrt(target_inv_mse * d.noise_quad / margin);
  out.amp = q.conjugate();

  double needed = 0.0;
  for (int k = 0; k < ns; ++k) {
    const double e = symbol[k] * std::norm(out.amp[k]) + 2.0 * cfg.circuit_energy[k];
    if (e <= 0.0) continue;
    needed = std::max(needed, e / (cfg.harvest_eff[k] * gain2[k]));
  }
  out.fc_power = std::max(needed, std::real(sol.blocks[0](ns, ns)));
  return out;
}

void CommonHarvesterConfig::validate() const {
  base.validate();
  if (energy_channel.size() != base.num_fc_antennas)
    throw InvalidArgument("energy_channel must have one entry per FC antenna");
  if (!(energy_channel.norm() > 0.0)) throw InvalidArgument("energy_channel must be nonzero");
  if ((base.harvest_eff.array() != 1.0).any())
    throw InvalidArgument("common-harvester model folds efficiency into the channel scale; "
                          "set harvest_eff to 1");
  if ((base.circuit_energy.array() != 0.0).any())
    throw InvalidArgument("common-harvester model has no per-sensor circuit drain; "
                          "set circuit_energy to 0");
}

namespace {

struct PooledStep {
  CVec amp;
  double inv_mse = 0.0;
};

// Closed-form amplification for a fixed filter under the pooled sum-power
// budget; the budget holds with equality by construction.
PooledStep pooled_amp(const CVec& f, const Vec& quad_weight, double noise_quad,
                      const Vec& sum_weight, double budget) {
  const Vec y = quad_weight + (noise_quad / budget) * sum_weight;
  const Vec inv_y = y.cwiseInverse();
  PooledStep s;
  s.inv_mse = f.cwiseAbs2().dot(inv_y);
  const double denom = (f.cwiseAbs2().cwiseProduct(inv_y).cwiseProduct(inv_y)).dot(sum_weight);
  const double kappa = std::sqrt(budget / denom);
  s.amp = kappa * f.conjugate().cwiseProduct(inv_y.cast<Complex>());
  return s;
}

}  // namespace

HarvesterRun common_harvester_mse_min(const CommonHarvesterConfig& cfg,
                                      const ChannelRealization& ch,
                                      const HarvesterOptions& opts) {
  cfg.validate();
  const NetworkConfig& base = cfg.base;
  const Vec sum_weight = base.symbol_power();
  const double budget = base.fc_power * cfg.energy_channel.squaredNorm();

  HarvesterRun run;
  run.fc_power = base.fc_power;
  run.beam = std::sqrt(base.fc_power) * cfg.energy_channel / cfg.energy_channel.norm();

  CVec amp = CVec::Constant(base.num_sensors,
                            Complex(std::sqrt(budget / sum_weight.sum()), 0.0));
  double prev = 0.0;
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    run.filter = optimal_filter(base, ch, amp);
    const CVec f = (ch.uplink.adjoint() * run.filter).conjugate();
    if (!(f.norm() > 0.0)) throw DegenerateDesign("filtered gains vanished");
    const Vec quad = f.cwiseAbs2().cwiseProduct(base.sense_var);
    const double noise = std::real(run.filter.dot(base.rx_noise_cov * run.filter));
    const PooledStep s = pooled_amp(f, quad, noise, sum_weight, budget);
    amp = s.amp;
    run.trace.push_back(s.inv_mse);
    run.iterations = iter;
    if (iter > 1 && std::abs(s.inv_mse - prev) <= opts.rel_tol * s.inv_mse) {
      run.converged = true;
      break;
    }
    prev = s.inv_mse;
  }
  run.amp = amp;
  run.filter = optimal_filter(base, ch, amp);
  run.mse = mse_with_optimal_filter(base, ch, amp);
  return run;
}

HarvesterRun common_harvester_power_min(const CommonHarvesterConfig& cfg,
                                        const ChannelRealization& ch, double target_inv_mse,
                                        const HarvesterOptions& opts) {
  cfg.validate();
  const NetworkConfig& base = cfg.base;
  if (!(target_inv_mse > 0.0)) throw InvalidArgument("target_inv_mse must be positive");
  const double hard_limit = base.sense_var.cwiseInverse().sum();
  if (!(target_inv_mse < hard_limit))
    throw InfeasibleTarget("target inverse MSE " + std::to_string(target_inv_mse) +
                           " is not below the infinite-power limit " +
                           std::to_string(hard_limit));

  const Vec sum_weight = base.symbol_power();
  const double gain2 = cfg.energy_channel.squaredNorm();

  HarvesterRun run;
  const double seed_budget = base.fc_power * gain2;
  CVec amp = CVec::Constant(base.num_sensors,
                            Complex(std::sqrt(seed_budget / sum_weight.sum()), 0.0));

  double power = base.fc_power;
  double prev = 0.0;
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    run.filter = optimal_filter(base, ch, amp);
    const CVec f = (ch.uplink.adjoint() * run.filter).conjugate();
    const Vec quad = f.cwiseAbs2().cwiseProduct(base.sense_var);
    const double noise = std::real(run.filter.dot(base.rx_noise_cov * run.filter));

    double limit = 0.0;
    for (int k = 0; k < base.num_sensors; ++k)
      if (std::norm(f[k]) > 0.0) limit += 1.0 / base.sense_var[k];
    if (!(target_inv_mse < limit))
      throw InfeasibleTarget("current filter cannot attain the target at any power");

    const auto inv_mse_at = [&](double p) {
      const Vec y = quad + (noise / (p * gain2)) * sum_weight;
      return f.cwiseAbs2().dot(y.cwiseInverse());
    };

    // The attainable inverse MSE grows with the budget, so the target power
    // is the unique root of a monotone scalar equation.
    double lo = 1e-12, hi = 1.0;
    while (inv_mse_at(hi) < target_inv_mse) {
      hi *= 2.0;
      if (hi > 1e18) throw InfeasibleTarget("power bracket exploded; target unattainable");
    }
    if (inv_mse_at(lo) > target_inv_mse) hi = lo;
    while (hi - lo > opts.bisect_rel_tol * hi) {
      const double mid = 0.5 * (lo + hi);
      (inv_mse_at(mid) < target_inv_mse ? lo : hi) = mid;
    }
    power = hi;

    const PooledStep s = pooled_amp(f, quad, noise, sum_weight, power * gain2);
    amp = s.amp;
    run.trace.push_back(power);
    run.iterations = iter;
    if (iter > 1 && std::abs(power - prev) <= opts.rel_tol * power) {
      run.converged = true;
      break;
    }
    prev = power;
  }
  run.amp = amp;
  run.fc_power = power;
  run.beam = std::sqrt(power) * cfg.energy_channel / cfg.energy_channel.norm();
  run.filter = optimal_filter(base, ch, amp);
  run.mse = mse_with_optimal_filter(base, ch, amp);
  return run;
}

std::vector<TradeoffPoint> tradeoff_curve(const CommonHarvesterConfig& cfg,
                                          const ChannelRealization& ch, const Vec& power_grid,
                                          const HarvesterOptions& opts) {
  cfg.validate();
  if (power_grid.size() == 0) throw InvalidArgument("power grid must be nonempty");
  for (int i = 0; i < power_grid.size(); ++i) {
    if (!(power_grid[i] > 0.0)) throw InvalidArgument("power grid must be positive");
    if (i > 0 && !(power_grid[i] > power_grid[i - 1]))
      throw InvalidArgument("power grid must be strictly ascending");
  }
  std::vector<TradeoffPoint> curve;
  curve.reserve(static_cast<size_t>(power_grid.size()));
  CommonHarvesterConfig local = cfg;
  for (int i = 0; i < power_grid.size(); ++i) {
    local.base.fc_power = power_grid[i];
    const HarvesterRun run = common_harvester_mse_min(local, ch, opts);
    curve.push_back({power_grid[i], run.mse});
  }
  return curve;
}

}  // namespace wpt::special
