#pragma once

#include <Eigen/Dense>

#include <span>

namespace fedcpu {

/// Analysis constants: smoothness L, PL constant delta, gradient variance
/// bound sigma_g^2 and the initial optimality gap E{F(w_0)} - F*.
struct BoundConstants {
  double smoothness = 1.0;
  double pl = 0.0;
  double grad_var = 1.0;
  double initial_gap = 1.0;

  void validate() const;
};

struct RoundTerms {
  double contraction = 1.0;  ///< c_t = 1 - mu tau delta
  double drift = 0.0;        ///< b_t = (L^2 mu^3 / 2)(tau (tau - 1) / 2)(sigma_g^2 / B)
  double aggregation = 0.0;  ///< L_t = mu^2 (sigma_g^2/B) tau ||a||^2/(1^T a)^2 + QMSE_t
  /// 1 - (L^2 mu^2 / 2) tau (tau - 1) - L mu tau >= 0
  bool step_condition_ok = true;
  /// 1 - mu tau delta >= 0
  bool contraction_condition_ok = true;
};

/// One round's schedule entry.
struct RoundSchedule {
  double lr = 0.01;
  Eigen::VectorXd a;  ///< integer coefficients (as reals)
  double qmse = 0.0;
};

/// Step-size hypotheses are checked and flagged; values are returned either way.
RoundTerms round_terms(double lr, int local_steps, const BoundConstants& c, int batch,
                       const Eigen::Ref<const Eigen::VectorXd>& a, double qmse);

/// (prod_t c_t) F0_gap + sum_t (b_t + (L/2) L_t) prod_{i>t} c_i
double optimality_gap_bound(const BoundConstants& c, std::span<const RoundSchedule> schedule,
                            int local_steps, int batch);

/// Error-free FedAvg specialization: a_t = 1, QMSE_t = 0, L_t = mu^2 (sigma_g^2/B) tau / K.
double error_free_gap_bound(const BoundConstants& c, std::span<const double> lrs, int devices,
                            int local_steps, int batch);

/// One application of gap' = c_t gap + b_t + (L/2) L_t.
double advance_gap(double gap, const RoundTerms& terms, const BoundConstants& c);

}  // namespace fedcpu
