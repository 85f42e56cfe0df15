#include "wpt/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <cstdio>

namespace wpt {

namespace detail {

void require_hermitian_psd(const CMat& m, const std::string& name, double tol) {
  if (m.rows() != m.cols()) throw InvalidArgument(name + " must be square");
  const double scale = std::max(1.0, m.norm());
  if ((m - m.adjoint()).norm() > tol * scale)
    throw InvalidArgument(name + " must be Hermitian");
  Eigen::SelfAdjointEigenSolver<CMat> es(hermitian_part(m), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol * scale)
    throw InvalidArgument(name + " must be positive semidefinite");
}

CMat effective_noise_cov(const NetworkConfig& cfg, const ChannelRealization& ch, const CVec& amp) {
  const CMat ha = ch.uplink * amp.asDiagonal();
  CMat cov = ha * cfg.sense_var.asDiagonal() * ha.adjoint() + cfg.rx_noise_cov;
  return hermitian_part(cov);
}

}  // namespace detail

void NetworkConfig::validate() const {
  if (num_sensors <= 0) throw InvalidArgument("num_sensors must be positive");
  if (num_fc_antennas <= 0) throw InvalidArgument("num_fc_antennas must be positive");
  if (!(param_var > 0.0)) throw InvalidArgument("param_var must be positive");
  if (sense_var.size() != num_sensors)
    throw InvalidArgument("sense_var must have one entry per sensor");
  if ((sense_var.array() <= 0.0).any())
    throw InvalidArgument("sense_var entries must be positive");
  if (rx_noise_cov.rows() != num_fc_antennas || rx_noise_cov.cols() != num_fc_antennas)
    throw InvalidArgument("rx_noise_cov must be n_r x n_r");
  detail::require_hermitian_psd(rx_noise_cov, "rx_noise_cov");
  {
    Eigen::SelfAdjointEigenSolver<CMat> es(detail::hermitian_part(rx_noise_cov),
                                           Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0))
      throw InvalidArgument("rx_noise_cov must be positive definite");
  }
  if (!(fc_power > 0.0)) throw InvalidArgument("fc_power must be positive");
  if (harvest_eff.size() != num_sensors)
    throw InvalidArgument("harvest_eff must have one entry per sensor");
  if ((harvest_eff.array() <= 0.0).any() || (harvest_eff.array() > 1.0).any())
    throw InvalidArgument("harvest_eff entries must lie in (0, 1]");
  if (circuit_energy.size() != num_sensors)
    throw InvalidArgument("circuit_energy must have one entry per sensor");
  if ((circuit_energy.array() < 0.0).any())
    throw InvalidArgument("circuit_energy entries must be nonnegative");
  if (energy_fraction != 0.5)
    throw InvalidArgument("only an equal split between transfer and reporting is supported");
}

static void check_channel(const NetworkConfig& cfg, const ChannelRealization& ch) {
  if (ch.uplink.rows() != cfg.num_fc_antennas || ch.uplink.cols() != cfg.num_sensors)
    throw InvalidArgument("uplink channel must be n_r x n_s");
  if (ch.downlink.rows() != cfg.num_fc_antennas || ch.downlink.cols() != cfg.num_sensors)
    throw InvalidArgument("downlink channel must be n_r x n_s");
}

Vec harvested_energy(const NetworkConfig& cfg, const ChannelRealization& ch,
                     const CMat& beam_gram) {
  cfg.validate();
  check_channel(cfg, ch);
  detail::require_hermitian_psd(beam_gram, "beam_gram");
  if (beam_gram.rows() != cfg.num_fc_antennas)
    throw InvalidArgument("beam_gram must be n_r x n_r");
  Vec energy(cfg.num_sensors);
  for (int k = 0; k < cfg.num_sensors; ++k) {
    const CVec g = ch.downlink.col(k);
    energy[k] = cfg.harvest_eff[k] * cfg.energy_fraction * std::real(g.dot(beam_gram * g));
  }
  return energy;
}

Vec available_transmit_power(const NetworkConfig& cfg, const ChannelRealization& ch,
                             const CMat& beam_gram) {
  const Vec energy = harvested_energy(cfg, ch, beam_gram);
  const double report_fraction = 1.0 - cfg.energy_fraction;
  return (energy - cfg.circuit_energy) / report_fraction;
}

Vec sensor_transmit_power(const NetworkConfig& cfg, const CVec& amp) {
  cfg.validate();
  if (amp.size() != cfg.num_sensors) throw InvalidArgument("amp must have one entry per sensor");
  return amp.cwiseAbs2().cwiseProduct(cfg.symbol_power());
}

double estimator_mse(const NetworkConfig& cfg, const ChannelRealization& ch,
                     const DesignPoint& design) {
  cfg.validate();
  check_channel(cfg, ch);
  if (design.amp.size() != cfg.num_sensors)
    throw InvalidArgument("design.amp must have one entry per sensor");
  if (design.filter.size() != cfg.num_fc_antennas)
    throw InvalidArgument("design.filter must have one entry per antenna");
  const CVec effective = ch.uplink * design.amp;
  const Complex gain = design.filter.dot(effective);  // v^H (H a)
  const double signal = std::norm(gain);
  if (!(signal > 0.0))
    throw DegenerateDesign("filtered effective channel is zero; estimator undefined");
  const CMat cov = detail::effective_noise_cov(cfg, ch, design.amp);
  const double noise = std::real(design.filter.dot(cov * design.filter));
  return noise / signal;
}

CVec optimal_filter(const NetworkConfig& cfg, const ChannelRealization& ch, const CVec& amp) {
  cfg.validate();
  check_channel(cfg, ch);
  if (amp.size() != cfg.num_sensors) throw InvalidArgument("amp must have one entry per sensor");
  const CVec effective = ch.uplink * amp;
  if (!(effective.norm() > 0.0))
    throw DegenerateDesign("effective channel is zero; no useful filter exists");
  const CMat cov = detail::effective_noise_cov(cfg, ch, amp);
  Eigen::SelfAdjointEigenSolver<CMat> es(cov, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw InvalidArgument("effective noise covariance is singular");
  if (hi / lo > 1e12)
    std::fprintf(stderr, "[wpt] warning: noise covariance condition %.3e exceeds 1e12\n", hi / lo);
  return Eigen::LDLT<CMat>(cov).solve(effective);
}

double mse_with_optimal_filter(const NetworkConfig& cfg, const ChannelRealization& ch,
                               const CVec& amp) {
  cfg.validate();
  check_channel(cfg, ch);
  if (amp.size() != cfg.num_sensors) throw InvalidArgument("amp must have one entry per sensor");
  const CVec effective = ch.uplink * amp;
  if (!(effective.norm() > 0.0))
    throw DegenerateDesign("effective channel is zero; estimator undefined");
  const CMat cov = detail::effective_noise_cov(cfg, ch, amp);
  const double quad = std::real(effective.dot(Eigen::LDLT<CMat>(cov).solve(effective)));
  if (!(quad > 0.0)) throw DegenerateDesign("filtered effective channel is zero");
  return 1.0 / quad;
}

}  // namespace wpt
