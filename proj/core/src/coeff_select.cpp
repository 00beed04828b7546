#include "fedcpu/coeff_select.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedcpu/bounded_qp.hpp"
#include "fedcpu/errors.hpp"

namespace fedcpu {
namespace {

struct SubproblemResult {
  Eigen::VectorXd a;
  bool feasible = true;
  double kkt_residual = 0.0;
};

double quad_form(const Eigen::MatrixXd& m, const Eigen::VectorXd& a) { return a.dot(m * a); }

// min ||a||^2  s.t.  1^T a = total,  a^T M a <= limit,  a >= 1.
//
// Dualizes the quadratic constraint: for a multiplier lambda the inner QP
// min a^T (I + lambda M) a over the shifted simplex is solved exactly, and
// lambda is bisected until the constraint is active.
SubproblemResult solve_fixed_sum(const Eigen::MatrixXd& m, double total, double limit) {
  const Eigen::Index k = m.rows();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(k, k);
  const Eigen::VectorXd lower = Eigen::VectorXd::Ones(k);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(k);

  auto inner = [&](double lambda) {
    return qp::solve_bounded_qp(2.0 * (eye + lambda * m), zero, lower, total);
  };
  auto residual = [&](double lambda, const qp::BoundedQpResult& r) {
    const double value = quad_form(m, r.x);
    const double scale = std::max(1.0, r.x.lpNorm<Eigen::Infinity>());
    double res = qp::kkt_residual(2.0 * (eye + lambda * m), zero, lower, total, r) / scale;
    if (std::isfinite(limit)) {
      const double lim_scale = std::max(1.0, limit);
      res = std::max(res, std::max(0.0, value - limit) / lim_scale);
      res = std::max(res, lambda * std::abs(value - limit) / lim_scale);
    }
    return res;
  };

  qp::BoundedQpResult r0 = inner(0.0);
  if (quad_form(m, r0.x) <= limit) return {r0.x, true, residual(0.0, r0)};

  // Feasibility at this sum level: smallest reachable a^T M a.
  const qp::BoundedQpResult rmin = qp::solve_bounded_qp(2.0 * m, zero, lower, total);
  if (quad_form(m, rmin.x) > limit) return {rmin.x, false, 0.0};

  double lo = 0.0;
  double hi = 1.0;
  qp::BoundedQpResult rhi = inner(hi);
  while (quad_form(m, rhi.x) > limit && hi < 1e15) {
    lo = hi;
    hi *= 4.0;
    rhi = inner(hi);
  }
  if (quad_form(m, rhi.x) > limit) return {rmin.x, true, 0.0};
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    qp::BoundedQpResult rm = inner(mid);
    if (quad_form(m, rm.x) > limit) {
      lo = mid;
    } else {
      hi = mid;
      rhi = std::move(rm);
    }
  }
  return {rhi.x, true, residual(hi, rhi)};
}

}  // namespace

void SelectionConfig::validate() const {
  if (!(theta > 0.0)) throw ConfigError("selection.theta must be > 0");
  if (max_iters < 1) throw ConfigError("selection.max_iters must be >= 1");
  if (!(qp_tolerance > 0.0)) throw ConfigError("selection.qp_tolerance must be > 0");
  if (brute_force_bound < 1) throw ConfigError("selection.brute_force_bound must be >= 1");
}

double default_theta(const LatticeSpec& lattice) {
  const double r = lattice.packing_radius();
  return r * r / 9.0;
}

double mismatch(const VectorRef& a) {
  const double sum = a.sum();
  if (!(sum > 0.0)) throw ConfigError("mismatch: 1^T a must be positive");
  return a.squaredNorm() / (sum * sum);
}

double aggregation_metric(const VectorRef& a, const MetricInputs& in) {
  return in.learning.weight() * mismatch(a) +
         quantization_mse(a, in.sigmas, in.sigma_q2, in.model_size);
}

RelaxationResult solve_relaxation(const Eigen::MatrixXd& m, double sigma_q2,
                                  const SelectionConfig& cfg) {
  cfg.validate();
  const Eigen::Index k = m.rows();
  if (k < 1 || m.cols() != k) throw ConfigError("solve_relaxation: decoding matrix must be square");
  const double limit = cfg.theta / (1.0 + 2.0 * sigma_q2);

  RelaxationResult out;
  Eigen::VectorXd a = Eigen::VectorXd::Ones(k);
  if (quad_form(m, a) > limit) {
    const qp::BoundedQpResult rmin = qp::solve_bounded_qp(
        2.0 * m, Eigen::VectorXd::Zero(k), Eigen::VectorXd::Ones(k), std::nullopt);
    a = rmin.x;
    if (quad_form(m, a) > limit) {
      out.a = a;
      out.feasible = false;
      out.fallback = true;
      out.squared_norms.push_back(a.squaredNorm());
      return out;
    }
  }

  out.squared_norms.push_back(a.squaredNorm());
  for (int n = 1; n <= cfg.max_iters; ++n) {
    SubproblemResult step = solve_fixed_sum(m, a.sum(), limit);
    if (!step.feasible) break;  // cannot happen from a feasible a^(n-1)
    out.kkt_residual = std::max(out.kkt_residual, step.kkt_residual);
    a = std::move(step.a);
    out.squared_norms.push_back(a.squaredNorm());
    out.iterations = n;
  }
  out.a = std::move(a);
  return out;
}

RelaxationResult solve_relaxation(const ChannelRealization& h, double snr, double sigma_q2,
                                  const SelectionConfig& cfg) {
  return solve_relaxation(decoding_matrix(h, snr), sigma_q2, cfg);
}

Eigen::VectorXi round_coefficients(const VectorRef& relaxed) {
  Eigen::VectorXi a(relaxed.size());
  for (Eigen::Index i = 0; i < relaxed.size(); ++i)
    a(i) = std::max(1, static_cast<int>(std::lround(relaxed(i))));
  return a;
}

CoefficientVector select_coefficients(const Eigen::MatrixXd& m, double sigma_q2,
                                      const SelectionConfig& cfg, const MetricInputs& metric) {
  const RelaxationResult relaxed = solve_relaxation(m, sigma_q2, cfg);
  CoefficientVector out;
  out.a = round_coefficients(relaxed.a);
  const Eigen::VectorXd a = out.a.cast<double>();
  out.dmse_slack = cfg.theta / (1.0 + 2.0 * sigma_q2) - quad_form(m, a);
  out.constraint_violated = out.dmse_slack < 0.0;
  out.fallback = relaxed.fallback;
  out.metric = aggregation_metric(a, metric);
  return out;
}

CoefficientVector select_coefficients(const ChannelRealization& h, double snr, double sigma_q2,
                                      const SelectionConfig& cfg, const MetricInputs& metric) {
  return select_coefficients(decoding_matrix(h, snr), sigma_q2, cfg, metric);
}

CoefficientVector brute_force_oracle(const Eigen::MatrixXd& m, double sigma_q2, double theta,
                                     const MetricInputs& metric, int bound) {
  const Eigen::Index k = m.rows();
  if (k > kBruteForceMaxDevices)
    throw ConfigError("brute_force_oracle: K = " + std::to_string(k) + " exceeds " +
                      std::to_string(kBruteForceMaxDevices));
  if (bound < 1) throw ConfigError("brute_force_oracle: bound must be >= 1");
  const double limit = theta / (1.0 + 2.0 * sigma_q2);

  Eigen::VectorXi z = Eigen::VectorXi::Zero(k);
  Eigen::VectorXi best_feasible, best_dmse;
  double best_metric = std::numeric_limits<double>::infinity();
  double best_form = std::numeric_limits<double>::infinity();
  auto better = [](double candidate, double incumbent) {
    if (!std::isfinite(incumbent)) return candidate < incumbent;
    return candidate < incumbent - 1e-12 * std::abs(incumbent);
  };
  while (true) {
    // Lexicographic increment with the first coordinate most significant.
    Eigen::Index i = k - 1;
    while (i >= 0 && z(i) == bound) z(i--) = 0;
    if (i < 0) break;
    ++z(i);

    const Eigen::VectorXd a = z.cast<double>();
    const double form = quad_form(m, a);
    if (better(form, best_form)) {
      best_form = form;
      best_dmse = z;
    }
    if (form <= limit) {
      const double value = aggregation_metric(a, metric);
      if (better(value, best_metric)) {
        best_metric = value;
        best_feasible = z;
      }
    }
  }

  CoefficientVector out;
  out.a = best_feasible.size() > 0 ? best_feasible : best_dmse;
  const Eigen::VectorXd a = out.a.cast<double>();
  out.metric = aggregation_metric(a, metric);
  out.dmse_slack = limit - quad_form(m, a);
  out.constraint_violated = best_feasible.size() == 0;
  return out;
}

CoefficientVector brute_force_oracle(const ChannelRealization& h, double snr, double sigma_q2,
                                     double theta, const MetricInputs& metric, int bound) {
  return brute_force_oracle(decoding_matrix(h, snr), sigma_q2, theta, metric, bound);
}

}  // namespace fedcpu
