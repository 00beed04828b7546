#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>

#include "fedcpu/rng.hpp"

namespace fedcpu {

/// Which quantity of h = g * exp(j phi) follows Exponential(rate).
enum class FadingLaw {
  power_gain_exponential,  ///< g^2 ~ Exp(rate)
  gain_exponential,        ///< g ~ Exp(rate)
};

std::string_view to_string(FadingLaw law);
FadingLaw fading_law_from_string(std::string_view name);

struct ChannelConfig {
  int antennas = 30;  ///< M
  int devices = 30;   ///< K
  double snr = 10.0;  ///< P / sigma_z^2, linear
  double power = 1.0; ///< per-dimension transmit power P
  FadingLaw law = FadingLaw::power_gain_exponential;
  double fading_rate = 5.0;

  /// sigma_z^2 per real noise component.
  double noise_variance() const { return power / snr; }
  void validate() const;
};

struct ChannelRealization {
  Eigen::MatrixXcd h_complex;  ///< M x K
  Eigen::MatrixXd h_real;      ///< 2M x K, Re stacked over Im

  static ChannelRealization from_complex(Eigen::MatrixXcd h);
  int antennas() const { return static_cast<int>(h_complex.rows()); }
  int devices() const { return static_cast<int>(h_complex.cols()); }
};

/// One block-fading realization: i.i.d. entries g * exp(j phi), phi ~ U(0, 2pi).
ChannelRealization sample_channel(const ChannelConfig& cfg, Rng& rng);

/// Y = H X + Z with Z ~ N(0, noise_variance) per real entry. X is K x s.
Eigen::MatrixXd propagate(const ChannelRealization& h, const Eigen::MatrixXd& x,
                          double noise_variance, Rng& rng);

}  // namespace fedcpu
