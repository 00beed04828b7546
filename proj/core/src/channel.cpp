#include "fedcpu/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "fedcpu/errors.hpp"

namespace fedcpu {

std::string_view to_string(FadingLaw law) {
  switch (law) {
    case FadingLaw::power_gain_exponential: return "power_gain_exponential";
    case FadingLaw::gain_exponential: return "gain_exponential";
  }
  return "power_gain_exponential";
}

FadingLaw fading_law_from_string(std::string_view name) {
  if (name == "power_gain_exponential") return FadingLaw::power_gain_exponential;
  if (name == "gain_exponential") return FadingLaw::gain_exponential;
  throw ConfigError("unknown fading law '" + std::string(name) + "'");
}

void ChannelConfig::validate() const {
  if (antennas < 1) throw ConfigError("channel.antennas must be >= 1");
  if (devices < 1) throw ConfigError("channel.devices must be >= 1");
  if (!(snr > 0.0)) throw ConfigError("channel.snr must be > 0");
  if (!(power > 0.0)) throw ConfigError("channel.power must be > 0");
  if (!(fading_rate > 0.0)) throw ConfigError("channel.fading_rate must be > 0");
}

ChannelRealization ChannelRealization::from_complex(Eigen::MatrixXcd h) {
  const Eigen::Index m = h.rows();
  Eigen::MatrixXd real(2 * m, h.cols());
  real.topRows(m) = h.real();
  real.bottomRows(m) = h.imag();
  return ChannelRealization{std::move(h), std::move(real)};
}

ChannelRealization sample_channel(const ChannelConfig& cfg, Rng& rng) {
  cfg.validate();
  std::exponential_distribution<double> expo(cfg.fading_rate);
  Eigen::MatrixXcd h(cfg.antennas, cfg.devices);
  for (Eigen::Index k = 0; k < h.cols(); ++k) {
    for (Eigen::Index m = 0; m < h.rows(); ++m) {
      const double draw = expo(rng);
      const double gain = cfg.law == FadingLaw::power_gain_exponential ? std::sqrt(draw) : draw;
      const double phase = 2.0 * std::numbers::pi * uniform01(rng);
      h(m, k) = std::polar(gain, phase);
    }
  }
  return ChannelRealization::from_complex(std::move(h));
}

Eigen::MatrixXd propagate(const ChannelRealization& h, const Eigen::MatrixXd& x,
                          double noise_variance, Rng& rng) {
  if (x.rows() != h.h_real.cols())
    throw ConfigError("propagate: X has " + std::to_string(x.rows()) + " rows but channel has " +
                      std::to_string(h.h_real.cols()) + " devices");
  if (noise_variance < 0.0) throw ConfigError("propagate: negative noise variance");
  Eigen::MatrixXd y = h.h_real * x;
  if (noise_variance > 0.0) {
    std::normal_distribution<double> noise(0.0, std::sqrt(noise_variance));
    for (Eigen::Index j = 0; j < y.cols(); ++j)
      for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, j) += noise(rng);
  }
  return y;
}

}  // namespace fedcpu
