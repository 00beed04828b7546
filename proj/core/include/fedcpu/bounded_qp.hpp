#pragma once

#include <Eigen/Dense>

#include <optional>

namespace fedcpu::qp {

struct BoundedQpResult {
  Eigen::VectorXd x;
  /// Multiplier of 1^T x = total (zero when there is no sum constraint).
  double sum_multiplier = 0.0;
  /// Multipliers of x >= lower; zero on free coordinates.
  Eigen::VectorXd bound_multipliers;
  int iterations = 0;
  bool converged = false;
};

/// Primal active-set solver for
///   minimize 1/2 x^T Q x + p^T x  subject to  x >= lower  [and 1^T x = total]
/// with Q symmetric positive definite. Sized for the K <= 64 problems of
/// coefficient selection.
BoundedQpResult solve_bounded_qp(const Eigen::MatrixXd& q, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& lower, std::optional<double> total,
                                 int max_iters = 1000);

/// Max-norm KKT residual of a BoundedQpResult (stationarity, primal and dual
/// feasibility, complementarity).
double kkt_residual(const Eigen::MatrixXd& q, const Eigen::VectorXd& p,
                    const Eigen::VectorXd& lower, std::optional<double> total,
                    const BoundedQpResult& r);

}  // namespace fedcpu::qp
