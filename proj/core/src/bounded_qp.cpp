#include "fedcpu/bounded_qp.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedcpu/errors.hpp"

namespace fedcpu::qp {

BoundedQpResult solve_bounded_qp(const Eigen::MatrixXd& q, const Eigen::VectorXd& p,
                                 const Eigen::VectorXd& lower, std::optional<double> total,
                                 int max_iters) {
  const Eigen::Index n = q.rows();
  if (q.cols() != n || p.size() != n || lower.size() != n)
    throw ConfigError("solve_bounded_qp: inconsistent dimensions");

  BoundedQpResult r;
  std::vector<bool> at_bound(static_cast<std::size_t>(n), true);
  if (total) {
    const double slack = *total - lower.sum();
    if (slack < -1e-12 * std::max(1.0, std::abs(*total)))
      throw ConfigError("solve_bounded_qp: sum constraint below the lower bounds");
    r.x = lower.array() + std::max(0.0, slack) / static_cast<double>(n);
    if (slack > 0.0) std::fill(at_bound.begin(), at_bound.end(), false);
  } else {
    r.x = lower;
  }
  r.bound_multipliers = Eigen::VectorXd::Zero(n);

  const double step_tol = 1e-13;
  for (r.iterations = 0; r.iterations < max_iters; ++r.iterations) {
    const Eigen::VectorXd g = q * r.x + p;
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!at_bound[static_cast<std::size_t>(i)]) free.push_back(i);
    const auto nf = static_cast<Eigen::Index>(free.size());

    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    double lambda = 0.0;
    if (nf > 0) {
      const Eigen::Index dim = total ? nf + 1 : nf;
      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
      Eigen::VectorXd rhs(dim);
      for (Eigen::Index a = 0; a < nf; ++a) {
        for (Eigen::Index b = 0; b < nf; ++b) kkt(a, b) = q(free[a], free[b]);
        rhs(a) = -g(free[a]);
      }
      if (total) {
        kkt.block(0, nf, nf, 1).setOnes();
        kkt.block(nf, 0, 1, nf).setOnes();
        rhs(nf) = 0.0;
      }
      const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
      for (Eigen::Index a = 0; a < nf; ++a) d(free[a]) = sol(a);
      if (total) lambda = sol(nf);
    } else if (total) {
      // Every coordinate pinned: the sum multiplier is free; pick the one
      // that makes all bound multipliers non-negative.
      lambda = -g.minCoeff();
    }

    const double scale = 1.0 + r.x.lpNorm<Eigen::Infinity>();
    if (d.lpNorm<Eigen::Infinity>() <= step_tol * scale) {
      const Eigen::VectorXd mu = g + q * d + Eigen::VectorXd::Constant(n, lambda);
      Eigen::Index release = -1;
      double most_negative = -1e-12 * (1.0 + g.lpNorm<Eigen::Infinity>());
      for (Eigen::Index i = 0; i < n; ++i) {
        if (at_bound[static_cast<std::size_t>(i)] && mu(i) < most_negative) {
          most_negative = mu(i);
          release = i;
        }
      }
      if (release < 0) {
        r.sum_multiplier = lambda;
        for (Eigen::Index i = 0; i < n; ++i)
          r.bound_multipliers(i) = at_bound[static_cast<std::size_t>(i)] ? std::max(0.0, mu(i)) : 0.0;
        r.converged = true;
        return r;
      }
      at_bound[static_cast<std::size_t>(release)] = false;
      continue;
    }

    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i : free) {
      if (d(i) < 0.0) {
        const double ratio = (lower(i) - r.x(i)) / d(i);
        if (ratio < alpha) {
          alpha = ratio;
          blocking = i;
        }
      }
    }
    r.x += alpha * d;
    if (blocking >= 0) {
      at_bound[static_cast<std::size_t>(blocking)] = true;
      r.x(blocking) = lower(blocking);
    }
  }
  return r;
}

double kkt_residual(const Eigen::MatrixXd& q, const Eigen::VectorXd& p,
                    const Eigen::VectorXd& lower, std::optional<double> total,
                    const BoundedQpResult& r) {
  const Eigen::VectorXd g = q * r.x + p;
  const Eigen::VectorXd stationarity =
      g + Eigen::VectorXd::Constant(g.size(), r.sum_multiplier) - r.bound_multipliers;
  double res = stationarity.lpNorm<Eigen::Infinity>();
  res = std::max(res, (lower - r.x).cwiseMax(0.0).maxCoeff());
  res = std::max(res, (-r.bound_multipliers).cwiseMax(0.0).maxCoeff());
  res = std::max(res, (r.bound_multipliers.array() * (r.x - lower).array()).abs().maxCoeff());
  if (total) res = std::max(res, std::abs(r.x.sum() - *total));
  return res;
}

}  // namespace fedcpu::qp
