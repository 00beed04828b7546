#include "fedcpu/receiver.hpp"

#include <cmath>
#include <string>

#include "fedcpu/errors.hpp"

namespace fedcpu {
namespace {

void require_coefficients(const VectorRef& a, Eigen::Index devices) {
  if (a.size() != devices)
    throw ConfigError("coefficient vector has length " + std::to_string(a.size()) +
                      ", expected " + std::to_string(devices));
  if (a.isZero(0.0)) throw ConfigError("coefficient vector must be non-zero");
}

void require_weights(const VectorRef& a, const VectorRef& sigmas) {
  if (a.size() != sigmas.size()) throw ConfigError("coefficients and sigmas differ in length");
  if ((a.array() < 0.0).any()) throw ConfigError("coefficients must be non-negative");
  if (a.isZero(0.0)) throw ConfigError("coefficient vector must be non-zero");
  if (!(sigmas.array() > 0.0).all()) throw ConfigError("device std values must be positive");
}

}  // namespace

Eigen::MatrixXd decoding_matrix(const ChannelRealization& h, double snr) {
  const Eigen::Index k = h.h_real.cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(k, k);
  gram.noalias() += snr * h.h_real.transpose() * h.h_real;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("decoding_matrix: factorization failed");
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(k, k));
  return 0.5 * (inv + inv.transpose());
}

EqualizerWeights optimal_equalizer(const ChannelRealization& h, const VectorRef& a, double snr) {
  require_coefficients(a, h.h_real.cols());
  if (!(snr > 0.0)) throw ConfigError("optimal_equalizer: snr must be positive");
  const Eigen::Index rows = h.h_real.rows();
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(rows, rows) / snr;
  system.noalias() += h.h_real * h.h_real.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success) throw NumericalError("optimal_equalizer: factorization failed");
  Eigen::VectorXd b = llt.solve(h.h_real * a);
  if (!b.allFinite()) throw NumericalError("optimal_equalizer: non-finite solution");
  return EqualizerWeights{std::move(b)};
}

double decoding_mse(const ChannelRealization& h, const VectorRef& a, double snr, double sigma_q2,
                    double model_size) {
  require_coefficients(a, h.h_real.cols());
  const Eigen::Index k = h.h_real.cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(k, k);
  gram.noalias() += snr * h.h_real.transpose() * h.h_real;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw NumericalError("decoding_mse: factorization failed");
  const double form = a.dot(llt.solve(a));
  return model_size * (1.0 + 2.0 * sigma_q2) * form;
}

double decoding_mse_at(const ChannelRealization& h, const VectorRef& a, const VectorRef& b,
                       double snr, double sigma_q2, double model_size) {
  require_coefficients(a, h.h_real.cols());
  if (b.size() != h.h_real.rows()) throw ConfigError("decoding_mse_at: equalizer length mismatch");
  const Eigen::VectorXd mismatch = h.h_real.transpose() * b - a;
  return model_size * (1.0 + 2.0 * sigma_q2) * (mismatch.squaredNorm() + b.squaredNorm() / snr);
}

DecodedCombination decode_combination(const Eigen::MatrixXd& y, const EqualizerWeights& b,
                                      const LatticeSpec& lattice, double power, double sigma_q2,
                                      const Eigen::VectorXi& a,
                                      const std::optional<Eigen::VectorXd>& true_point) {
  if (y.rows() != b.b.size())
    throw ConfigError("decode_combination: Y has " + std::to_string(y.rows()) +
                      " rows but equalizer has length " + std::to_string(b.b.size()));
  if (!(power > 0.0)) throw ConfigError("decode_combination: power must be positive");
  const double scale = std::sqrt((1.0 + 2.0 * sigma_q2) / power);
  const Eigen::VectorXd equalized = scale * (y.transpose() * b.b);
  DecodedCombination out{lattice.quantize(equalized), a, std::nullopt};
  if (true_point) {
    if (true_point->size() != out.point.size())
      throw ConfigError("decode_combination: reference point length mismatch");
    const double tol = 1e-6 * lattice.packing_radius();
    out.decode_error = (out.point - *true_point).lpNorm<Eigen::Infinity>() > tol;
  }
  return out;
}

double optimal_eta(const VectorRef& a, const VectorRef& sigmas, double sigma_q2) {
  require_weights(a, sigmas);
  const double weighted = (a.array().square() * sigmas.array()).sum();
  return (1.0 + sigma_q2) * a.squaredNorm() / weighted;
}

double quantization_mse(const VectorRef& a, const VectorRef& sigmas, double sigma_q2,
                        double model_size) {
  require_weights(a, sigmas);
  const double sum_a = a.sum();
  const double norm2 = a.squaredNorm();
  const double var_term = (a.array().square() * sigmas.array().square()).sum();
  const double std_term = (a.array().square() * sigmas.array()).sum();
  const double value =
      model_size / (sum_a * sum_a) * (var_term - std_term * std_term / ((1.0 + sigma_q2) * norm2));
  return std::max(0.0, value);
}

double quantization_mse_at(const VectorRef& a, const VectorRef& sigmas, double sigma_q2,
                           double model_size, double eta) {
  require_weights(a, sigmas);
  if (!(eta > 0.0)) throw ConfigError("quantization_mse_at: eta must be positive");
  const double sum_a = a.sum();
  const Eigen::ArrayXd gap = (1.0 / eta - sigmas.array()) * a.array();
  return model_size / (sum_a * sum_a) *
         (gap.square().sum() + a.squaredNorm() * sigma_q2 / (eta * eta));
}

GlobalUpdateEstimate estimate_global_update(const DecodedCombination& decoded,
                                            const Eigen::MatrixXd& dithers, const VectorRef& means,
                                            const VectorRef& sigmas, double eta, double sigma_q2,
                                            double dmse) {
  const Eigen::VectorXd a = decoded.a.cast<double>();
  const double sum_a = a.sum();
  if (!(sum_a > 0.0)) throw ConfigError("estimate_global_update: 1^T a must be positive");
  if (!(eta > 0.0)) throw ConfigError("estimate_global_update: eta must be positive");
  if (dithers.rows() != a.size() || dithers.cols() != decoded.point.size())
    throw ConfigError("estimate_global_update: dither matrix must be K x s");
  if (means.size() != a.size()) throw ConfigError("estimate_global_update: means length mismatch");

  GlobalUpdateEstimate out;
  out.delta_w_g = (decoded.point - dithers.transpose() * a) / (eta * sum_a);
  out.delta_w_g.array() += a.dot(means) / sum_a;
  out.eta = eta;
  out.dmse = dmse;
  out.qmse = quantization_mse_at(a, sigmas, sigma_q2, static_cast<double>(decoded.point.size()), eta);
  return out;
}

}  // namespace fedcpu
