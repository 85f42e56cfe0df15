#pragma once

#include "wpt/types.hpp"

namespace wpt {

// Energy harvested by each sensor during the transfer phase, given the Gram
// matrix of the energy beams: zeta_k * tau * g_k^H W g_k.
Vec harvested_energy(const NetworkConfig& cfg, const ChannelRealization& ch, const CMat& beam_gram);

// Power each sensor can spend in the reporting phase after circuit overhead.
// May be negative when the overhead exceeds what was harvested.
Vec available_transmit_power(const NetworkConfig& cfg, const ChannelRealization& ch,
                             const CMat& beam_gram);

// Power sensor k actually radiates for amplification amp: |amp_k|^2 * (param_var + sense_var_k).
Vec sensor_transmit_power(const NetworkConfig& cfg, const CVec& amp);

// Estimator MSE of the linear fusion rule for an explicit design point.
// Throws DegenerateDesign when the filtered effective channel is zero.
double estimator_mse(const NetworkConfig& cfg, const ChannelRealization& ch,
                     const DesignPoint& design);

// MMSE receive filter for a fixed amplification vector (unit-gain scaling).
CVec optimal_filter(const NetworkConfig& cfg, const ChannelRealization& ch, const CVec& amp);

// MSE attained by `amp` under its own optimal filter, evaluated in closed form.
double mse_with_optimal_filter(const NetworkConfig& cfg, const ChannelRealization& ch,
                               const CVec& amp);

namespace detail {
// Covariance of the filtered measurement noise plus receiver noise:
// H diag(amp) R_s diag(amp)^H H^H + R_n.
CMat effective_noise_cov(const NetworkConfig& cfg, const ChannelRealization& ch, const CVec& amp);
}  // namespace detail

}  // namespace wpt
