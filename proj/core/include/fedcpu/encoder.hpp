#pragma once

#include <Eigen/Dense>

#include "fedcpu/lattice.hpp"

namespace fedcpu {

/// Local model update delta_w = w_tau - w_0 uploaded by one device.
struct LocalUpdate {
  Eigen::VectorXd delta_w;
  int device_id = 0;
};

/// Zero-mean, unit-variance update plus the (mean, std) side information
/// the device reports to the server out of band.
struct NormalizedUpdate {
  Eigen::VectorXd w_hat;
  double mean = 0.0;
  double std = 1.0;
};

/// x = sqrt(P / (1 + 2 sigma_q^2)) * w_bar
struct TransmitSignal {
  Eigen::VectorXd x;
  Eigen::VectorXd quantized_point;
  DitherVector dither;
  double gain = 1.0;
};

/// Std used for a constant update; its normalized vector is all zeros.
inline constexpr double kSigmaFloor = 1e-12;

/// Population mean/std normalization. Throws DegenerateUpdateError when the
/// update has (numerically) zero spread.
NormalizedUpdate normalize_update(const LocalUpdate& update);

/// As normalize_update, but substitutes w_hat = 0 and std = kSigmaFloor for
/// a degenerate update. `degenerate` is set when that happened.
NormalizedUpdate normalize_update_or_floor(const LocalUpdate& update, bool* degenerate = nullptr);

/// Q(w_hat + d), blockwise.
Eigen::VectorXd dithered_quantize(const NormalizedUpdate& update, const LatticeSpec& lattice,
                                  const DitherVector& dither);

/// sqrt(P / (1 + 2 sigma_q^2)); P is the per-dimension power budget.
double transmit_gain(double power, double sigma_q2);

TransmitSignal scale_for_transmit(Eigen::VectorXd w_bar, DitherVector dither, double power,
                                  double sigma_q2);

}  // namespace fedcpu
