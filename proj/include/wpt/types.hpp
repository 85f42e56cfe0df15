#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>
#include <string>

namespace wpt {

using Complex = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

// Thrown on malformed inputs: dimension mismatches, non-PSD covariances,
// out-of-range efficiencies and the like.
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when a design point makes the estimator undefined (zero effective
// channel after filtering), so the MSE expression has no value.
class DegenerateDesign : public std::runtime_error {
 public:
  explicit DegenerateDesign(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a relaxed solution fails its expected structure (e.g. the
// rank-one residual of a recovered matrix exceeds tolerance).
class CertificateFailure : public std::runtime_error {
 public:
  explicit CertificateFailure(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when a requested performance target is provably unattainable.
class InfeasibleTarget : public std::runtime_error {
 public:
  explicit InfeasibleTarget(const std::string& what) : std::runtime_error(what) {}
};

// Static description of the network: sizes, noise statistics, power budget
// and harvesting parameters. Channel realizations live separately.
struct NetworkConfig {
  int num_sensors = 0;      // number of single-antenna sensors
  int num_fc_antennas = 0;  // antennas at the fusion center
  double param_var = 1.0;   // variance of the observed parameter
  Vec sense_var;            // per-sensor sensing noise variance (diagonal covariance)
  CMat rx_noise_cov;        // receive noise covariance at the fusion center
  double fc_power = 1.0;    // total transmit power budget at the fusion center [W]
  Vec harvest_eff;          // per-sensor RF-to-DC conversion efficiency, in (0, 1]
  Vec circuit_energy;       // per-sensor circuit energy overhead per slot [J]
  double energy_fraction = 0.5;  // fraction of the slot spent transferring energy

  // Throws InvalidArgument if any field is inconsistent.
  void validate() const;

  // Convenience: per-sensor amplified signal power factor (param_var + sense_var).
  Vec symbol_power() const { return Vec::Constant(num_sensors, param_var) + sense_var; }
};

// One draw of the propagation environment.
//   uplink:   n_r x n_s, column k is sensor k's channel to the fusion center
//   downlink: n_r x n_s, column k is the energy channel toward sensor k
struct ChannelRealization {
  CMat uplink;
  CMat downlink;

  int num_sensors() const { return static_cast<int>(uplink.cols()); }
  int num_fc_antennas() const { return static_cast<int>(uplink.rows()); }
};

// A full operating point of the system.
//   amp:       per-sensor complex amplification coefficients
//   beam_gram: Gram matrix of the energy beams (sum of w w^H), PSD
//   filter:    receive combining vector at the fusion center
struct DesignPoint {
  CVec amp;
  CMat beam_gram;
  CVec filter;
};

namespace detail {
// Hermitian part of a square matrix; used to wash out asymmetric rounding.
inline CMat hermitian_part(const CMat& m) { return 0.5 * (m + m.adjoint()); }

// Throws InvalidArgument unless m is Hermitian PSD within a relative tolerance.
void require_hermitian_psd(const CMat& m, const std::string& name, double tol = 1e-9);
}  // namespace detail

}  // namespace wpt
