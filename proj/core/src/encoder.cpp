#include "fedcpu/encoder.hpp"

#include <cmath>
#include <string>

#include "fedcpu/errors.hpp"

namespace fedcpu {

NormalizedUpdate normalize_update(const LocalUpdate& update) {
  const Eigen::VectorXd& dw = update.delta_w;
  if (dw.size() < 2) throw ConfigError("normalize_update: model size must be at least 2");
  if (!dw.allFinite())
    throw std::invalid_argument("normalize_update: device " + std::to_string(update.device_id) +
                                " has non-finite entries");
  const double n = static_cast<double>(dw.size());
  const double mean = dw.sum() / n;
  const Eigen::ArrayXd centered = dw.array() - mean;
  const double std = std::sqrt(centered.square().sum() / n);
  // Rounding in the mean leaves a tiny residual spread on constant inputs.
  if (!(std > kSigmaFloor * std::max(1.0, std::abs(mean))))
    throw DegenerateUpdateError("normalize_update: device " + std::to_string(update.device_id) +
                                " produced a constant update");
  return NormalizedUpdate{(centered / std).matrix(), mean, std};
}

NormalizedUpdate normalize_update_or_floor(const LocalUpdate& update, bool* degenerate) {
  if (degenerate) *degenerate = false;
  try {
    return normalize_update(update);
  } catch (const DegenerateUpdateError&) {
    if (degenerate) *degenerate = true;
    const double n = static_cast<double>(update.delta_w.size());
    return NormalizedUpdate{Eigen::VectorXd::Zero(update.delta_w.size()),
                            update.delta_w.sum() / n, kSigmaFloor};
  }
}

Eigen::VectorXd dithered_quantize(const NormalizedUpdate& update, const LatticeSpec& lattice,
                                  const DitherVector& dither) {
  if (update.w_hat.size() != dither.values.size())
    throw ConfigError("dithered_quantize: update length " + std::to_string(update.w_hat.size()) +
                      " != dither length " + std::to_string(dither.values.size()));
  return lattice.quantize(update.w_hat + dither.values);
}

double transmit_gain(double power, double sigma_q2) {
  if (!(power > 0.0)) throw ConfigError("transmit power must be positive");
  if (!(sigma_q2 >= 0.0)) throw ConfigError("second moment must be non-negative");
  return std::sqrt(power / (1.0 + 2.0 * sigma_q2));
}

TransmitSignal scale_for_transmit(Eigen::VectorXd w_bar, DitherVector dither, double power,
                                  double sigma_q2) {
  const double gain = transmit_gain(power, sigma_q2);
  Eigen::VectorXd x = gain * w_bar;
  return TransmitSignal{std::move(x), std::move(w_bar), std::move(dither), gain};
}

}  // namespace fedcpu
