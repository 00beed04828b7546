#include "fedcpu/oracles.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "fedcpu/errors.hpp"

namespace fedcpu::oracle {
namespace {

// Visits every vector whose i-th entry is drawn from choices[i].
template <typename Visit>
void for_each_product(const std::vector<std::vector<double>>& choices, Visit&& visit) {
  const std::size_t n = choices.size();
  std::vector<std::size_t> idx(n, 0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  while (true) {
    for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) = choices[i][idx[i]];
    visit(v);
    std::size_t i = 0;
    while (i < n && idx[i] + 1 == choices[i].size()) idx[i++] = 0;
    if (i == n) return;
    ++idx[i];
  }
}

Eigen::VectorXd enumerate_e8(const Eigen::VectorXd& y) {
  Eigen::VectorXd best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (double offset : {0.0, 0.5}) {
    std::vector<std::vector<double>> choices(8);
    for (int i = 0; i < 8; ++i) {
      const double lo = std::ceil(y(i) - 1.0 - offset);
      const double hi = std::floor(y(i) + 1.0 - offset);
      for (double c = lo; c <= hi; c += 1.0) choices[i].push_back(c + offset);
    }
    for_each_product(choices, [&](const Eigen::VectorXd& c) {
      const double sum = c.sum();
      if (std::fmod(std::abs(sum), 2.0) != 0.0) return;
      const double dist = (y - c).squaredNorm();
      if (dist < best_dist) {
        best_dist = dist;
        best = c;
      }
    });
  }
  return best;
}

}  // namespace

Eigen::VectorXd enumerate_nearest_point(const LatticeSpec& lattice,
                                        const Eigen::Ref<const Eigen::VectorXd>& x, int radius) {
  const int n = lattice.block_dim();
  if (x.size() != n) throw ConfigError("enumerate_nearest_point: dimension mismatch");
  const Eigen::VectorXd y = x / lattice.scale();
  if (lattice.kind() == LatticeKind::e8) return lattice.scale() * enumerate_e8(y);
  if (n > 4) throw ConfigError("enumeration oracle supports block dimension <= 4 (or E8)");

  const Eigen::MatrixXd& g = lattice.generator();
  const Eigen::VectorXd center = g.colPivHouseholderQr().solve(y).array().round().matrix();
  std::vector<std::vector<double>> choices(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int d = -radius; d <= radius; ++d) choices[static_cast<std::size_t>(i)].push_back(center(i) + d);

  Eigen::VectorXd best;
  double best_dist = std::numeric_limits<double>::infinity();
  for_each_product(choices, [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd p = g * z;
    const double dist = (y - p).squaredNorm();
    if (dist < best_dist) {
      best_dist = dist;
      best = p;
    }
  });
  return lattice.scale() * best;
}

bool is_lattice_point(const LatticeSpec& lattice, const Eigen::Ref<const Eigen::VectorXd>& point,
                      double tol) {
  if (point.size() != lattice.block_dim()) return false;
  const Eigen::VectorXd z =
      lattice.generator().fullPivLu().solve(point / lattice.scale());
  return ((z.array() - z.array().round()).abs() <= tol).all();
}

}  // namespace fedcpu::oracle
