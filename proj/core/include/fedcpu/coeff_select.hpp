#pragma once

#include <Eigen/Dense>

#include <limits>
#include <vector>

#include "fedcpu/channel.hpp"
#include "fedcpu/lattice.hpp"
#include "fedcpu/receiver.hpp"

namespace fedcpu {

struct SelectionConfig {
  /// Per-dimension DMSE threshold on (1 + 2 sigma_q^2) a^T M a.
  double theta = std::numeric_limits<double>::infinity();
  /// Target decode-error rate. Reported against the measured rate only.
  double epsilon = 0.05;
  int max_iters = 5;
  double qp_tolerance = 1e-6;
  int brute_force_bound = 5;

  void validate() const;
};

/// theta giving an effective-noise std of one third of the packing radius.
double default_theta(const LatticeSpec& lattice);

/// Learning constants that weight the coefficient mismatch term.
struct LearningTerms {
  double lr = 0.01;
  double grad_var = 1.0;
  int batch = 100;
  int local_steps = 3;

  /// mu^2 (sigma_g^2 / B) tau
  double weight() const {
    return lr * lr * (grad_var / static_cast<double>(batch)) * static_cast<double>(local_steps);
  }
};

struct MetricInputs {
  LearningTerms learning;
  Eigen::VectorXd sigmas;  ///< per-device update std
  double sigma_q2 = 0.0;
  double model_size = 1.0;
};

/// ||a||^2 / (1^T a)^2
double mismatch(const VectorRef& a);

/// mu^2 (sigma_g^2/B) tau ||a||^2/(1^T a)^2 + QMSE(a)
double aggregation_metric(const VectorRef& a, const MetricInputs& in);

struct CoefficientVector {
  Eigen::VectorXi a;
  double metric = 0.0;
  /// theta / (1 + 2 sigma_q^2) - a^T M a; negative when the DMSE target is missed.
  double dmse_slack = 0.0;
  bool constraint_violated = false;
  /// The relaxation was infeasible and the minimum-DMSE fallback was used.
  bool fallback = false;
};

struct RelaxationResult {
  Eigen::VectorXd a;
  bool feasible = true;
  bool fallback = false;
  int iterations = 0;
  /// Largest KKT residual over the convex subproblems.
  double kkt_residual = 0.0;
  /// ||a^(n)||^2 for n = 0..iterations.
  std::vector<double> squared_norms;
};

/// Successive convexification of
///   min ||a||^2 / (1^T a)^2  s.t.  a^T M a <= theta / (1 + 2 sigma_q^2),  a >= 1
/// where each step solves min ||a||^2 at fixed 1^T a = 1^T a^(n-1).
///
/// a^(0) = 1 when it is feasible. Otherwise a^(0) is the minimizer of a^T M a
/// over a >= 1; if even that misses the threshold, it is returned as the
/// (flagged) fallback.
RelaxationResult solve_relaxation(const Eigen::MatrixXd& decoding_matrix, double sigma_q2,
                                  const SelectionConfig& cfg);
RelaxationResult solve_relaxation(const ChannelRealization& h, double snr, double sigma_q2,
                                  const SelectionConfig& cfg);

/// Nearest-integer rounding that keeps entries >= 1.
Eigen::VectorXi round_coefficients(const VectorRef& relaxed);

CoefficientVector select_coefficients(const ChannelRealization& h, double snr, double sigma_q2,
                                      const SelectionConfig& cfg, const MetricInputs& metric);
CoefficientVector select_coefficients(const Eigen::MatrixXd& decoding_matrix, double sigma_q2,
                                      const SelectionConfig& cfg, const MetricInputs& metric);

/// Exhaustive search over a in {0..bound}^K \ {0} meeting the DMSE threshold,
/// minimizing the exact aggregation metric. Ties go to the first vector in
/// increasing lexicographic order. If nothing is feasible, the minimum-DMSE
/// vector is returned with constraint_violated set. Refuses K > 6.
CoefficientVector brute_force_oracle(const Eigen::MatrixXd& decoding_matrix, double sigma_q2,
                                     double theta, const MetricInputs& metric, int bound);
CoefficientVector brute_force_oracle(const ChannelRealization& h, double snr, double sigma_q2,
                                     double theta, const MetricInputs& metric, int bound);

inline constexpr int kBruteForceMaxDevices = 6;

}  // namespace fedcpu
