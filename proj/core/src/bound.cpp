#include "fedcpu/bound.hpp"

#include <vector>

#include "fedcpu/errors.hpp"

namespace fedcpu {

void BoundConstants::validate() const {
  if (!(smoothness > 0.0)) throw ConfigError("bound.smoothness must be > 0");
  if (!(pl >= 0.0)) throw ConfigError("bound.pl must be >= 0");
  if (!(grad_var >= 0.0)) throw ConfigError("bound.grad_var must be >= 0");
  if (!(initial_gap >= 0.0)) throw ConfigError("bound.initial_gap must be >= 0");
}

RoundTerms round_terms(double lr, int local_steps, const BoundConstants& c, int batch,
                       const Eigen::Ref<const Eigen::VectorXd>& a, double qmse) {
  c.validate();
  if (local_steps < 1 || batch < 1) throw ConfigError("round_terms: tau and B must be >= 1");
  const double tau = local_steps;
  const double l = c.smoothness;
  const double noise = c.grad_var / static_cast<double>(batch);
  const double sum_a = a.sum();
  if (!(sum_a > 0.0)) throw ConfigError("round_terms: 1^T a must be positive");

  RoundTerms t;
  t.contraction = 1.0 - lr * tau * c.pl;
  t.drift = (l * l * lr * lr * lr / 2.0) * (tau * (tau - 1.0) / 2.0) * noise;
  t.aggregation = lr * lr * noise * tau * (a.squaredNorm() / (sum_a * sum_a)) + qmse;
  t.step_condition_ok = 1.0 - (l * l * lr * lr / 2.0) * tau * (tau - 1.0) - l * lr * tau >= 0.0;
  t.contraction_condition_ok = t.contraction >= 0.0;
  return t;
}

double advance_gap(double gap, const RoundTerms& terms, const BoundConstants& c) {
  return terms.contraction * gap + terms.drift + 0.5 * c.smoothness * terms.aggregation;
}

double optimality_gap_bound(const BoundConstants& c, std::span<const RoundSchedule> schedule,
                            int local_steps, int batch) {
  c.validate();
  const std::size_t n = schedule.size();
  std::vector<RoundTerms> terms;
  terms.reserve(n);
  for (const RoundSchedule& s : schedule)
    terms.push_back(round_terms(s.lr, local_steps, c, batch, s.a, s.qmse));

  double product = 1.0;
  for (const RoundTerms& t : terms) product *= t.contraction;
  double bound = product * c.initial_gap;
  for (std::size_t t = 0; t < n; ++t) {
    double tail = 1.0;
    for (std::size_t i = t + 1; i < n; ++i) tail *= terms[i].contraction;
    bound += (terms[t].drift + 0.5 * c.smoothness * terms[t].aggregation) * tail;
  }
  return bound;
}

double error_free_gap_bound(const BoundConstants& c, std::span<const double> lrs, int devices,
                            int local_steps, int batch) {
  c.validate();
  if (devices < 1) throw ConfigError("error_free_gap_bound: K must be >= 1");
  const double tau = local_steps;
  const double l = c.smoothness;
  const double noise = c.grad_var / static_cast<double>(batch);
  const std::size_t n = lrs.size();
  std::vector<double> contraction(n), residual(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double lr = lrs[t];
    contraction[t] = 1.0 - lr * tau * c.pl;
    const double drift = (l * l * lr * lr * lr / 2.0) * (tau * (tau - 1.0) / 2.0) * noise;
    const double ideal = lr * lr * noise * tau * (1.0 / static_cast<double>(devices));
    residual[t] = drift + 0.5 * l * ideal;
  }
  double product = 1.0;
  for (double ct : contraction) product *= ct;
  double bound = product * c.initial_gap;
  for (std::size_t t = 0; t < n; ++t) {
    double tail = 1.0;
    for (std::size_t i = t + 1; i < n; ++i) tail *= contraction[i];
    bound += residual[t] * tail;
  }
  return bound;
}

}  // namespace fedcpu
