#pragma once

#include <Eigen/Dense>

#include <optional>

#include "fedcpu/channel.hpp"
#include "fedcpu/lattice.hpp"

namespace fedcpu {

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

struct EqualizerWeights {
  Eigen::VectorXd b;  ///< length 2M
};

/// Output of the first receiver layer.
struct DecodedCombination {
  Eigen::VectorXd point;  ///< claimed a^T W_bar, blockwise a lattice point
  Eigen::VectorXi a;
  /// Simulation-only ground truth comparison; empty when no reference was given.
  std::optional<bool> decode_error;
};

struct GlobalUpdateEstimate {
  Eigen::VectorXd delta_w_g;
  double eta = 1.0;
  double dmse = 0.0;
  double qmse = 0.0;
};

/// (I + SNR H^T H)^{-1}, K x K.
Eigen::MatrixXd decoding_matrix(const ChannelRealization& h, double snr);

/// b^T = a^T H^T ((1/SNR) I + H H^T)^{-1}
EqualizerWeights optimal_equalizer(const ChannelRealization& h, const VectorRef& a, double snr);

/// Closed form s (1 + 2 sigma_q^2) a^T (I + SNR H^T H)^{-1} a.
double decoding_mse(const ChannelRealization& h, const VectorRef& a, double snr, double sigma_q2,
                    double model_size);

/// Direct form s (1 + 2 sigma_q^2) (||b^T H - a^T||^2 + ||b||^2 / SNR) for any b.
double decoding_mse_at(const ChannelRealization& h, const VectorRef& a, const VectorRef& b,
                       double snr, double sigma_q2, double model_size);

/// Scales b^T Y by sqrt((1 + 2 sigma_q^2) / P) and quantizes blockwise. When
/// true_point is given, decode_error records whether a different lattice
/// point was decoded.
DecodedCombination decode_combination(const Eigen::MatrixXd& y, const EqualizerWeights& b,
                                      const LatticeSpec& lattice, double power, double sigma_q2,
                                      const Eigen::VectorXi& a,
                                      const std::optional<Eigen::VectorXd>& true_point = std::nullopt);

/// eta = (1 + sigma_q^2) ||a||^2 / (a^T diag(sigma) a)
double optimal_eta(const VectorRef& a, const VectorRef& sigmas, double sigma_q2);

/// QMSE at the optimal eta (closed form).
double quantization_mse(const VectorRef& a, const VectorRef& sigmas, double sigma_q2,
                        double model_size);

/// QMSE for an arbitrary normalizer eta.
double quantization_mse_at(const VectorRef& a, const VectorRef& sigmas, double sigma_q2,
                           double model_size, double eta);

/// Second layer: removes a^T D, rescales by eta 1^T a and restores the
/// weighted mean. `dithers` is K x s (the server's copy of every device dither).
GlobalUpdateEstimate estimate_global_update(const DecodedCombination& decoded,
                                            const Eigen::MatrixXd& dithers, const VectorRef& means,
                                            const VectorRef& sigmas, double eta, double sigma_q2,
                                            double dmse = 0.0);

}  // namespace fedcpu
