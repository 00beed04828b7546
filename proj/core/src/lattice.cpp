#include "fedcpu/lattice.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fedcpu/errors.hpp"

namespace fedcpu {
namespace {

inline double round_half_up(double v) { return std::floor(v + 0.5); }

// Rectangular lattice Z x sqrt(3)Z, i.e. the even coset of A2.
inline void decode_rect(double y0, double y1, double& o0, double& o1) {
  constexpr double kRoot3 = 1.7320508075688772;
  o0 = round_half_up(y0);
  o1 = kRoot3 * round_half_up(y1 / kRoot3);
}

void decode_hexagonal(const double* y, double* out) {
  constexpr double kHalfRoot3 = 0.8660254037844386;
  double a0, a1, b0, b1;
  decode_rect(y[0], y[1], a0, a1);
  decode_rect(y[0] - 0.5, y[1] - kHalfRoot3, b0, b1);
  b0 += 0.5;
  b1 += kHalfRoot3;
  const double da = (y[0] - a0) * (y[0] - a0) + (y[1] - a1) * (y[1] - a1);
  const double db = (y[0] - b0) * (y[0] - b0) + (y[1] - b1) * (y[1] - b1);
  if (db < da) {
    out[0] = b0;
    out[1] = b1;
  } else {
    out[0] = a0;
    out[1] = a1;
  }
}

// D8: integer vectors with even coordinate sum. Round, then fix parity by
// re-rounding the coordinate with the largest rounding error.
double decode_d8(const double* y, double* out) {
  long parity = 0;
  int worst = 0;
  double worst_err = -1.0;
  for (int i = 0; i < 8; ++i) {
    out[i] = round_half_up(y[i]);
    parity += static_cast<long>(out[i]);
    const double err = std::abs(y[i] - out[i]);
    if (err > worst_err) {
      worst_err = err;
      worst = i;
    }
  }
  if (parity % 2 != 0) out[worst] += (y[worst] - out[worst] >= 0.0) ? 1.0 : -1.0;
  double dist = 0.0;
  for (int i = 0; i < 8; ++i) dist += (y[i] - out[i]) * (y[i] - out[i]);
  return dist;
}

// E8 = D8 u (D8 + 1/2).
void decode_e8(const double* y, double* out) {
  std::array<double, 8> a{}, b{}, shifted{};
  const double da = decode_d8(y, a.data());
  for (int i = 0; i < 8; ++i) shifted[i] = y[i] - 0.5;
  const double db = decode_d8(shifted.data(), b.data());
  if (db < da) {
    for (int i = 0; i < 8; ++i) out[i] = b[i] + 0.5;
  } else {
    std::copy(a.begin(), a.end(), out);
  }
}

Eigen::MatrixXd hexagonal_generator() {
  Eigen::MatrixXd g(2, 2);
  g << 1.0, 0.5,
       0.0, std::sqrt(3.0) / 2.0;
  return g;
}

// Columns are the standard integer/half-integer E8 basis.
Eigen::MatrixXd e8_generator() {
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(8, 8);
  rows(0, 0) = 2.0;
  for (int i = 1; i < 7; ++i) {
    rows(i, i - 1) = -1.0;
    rows(i, i) = 1.0;
  }
  rows.row(7).setConstant(0.5);
  return rows.transpose();
}

void check_finite(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (!x.allFinite()) throw std::invalid_argument("lattice input contains non-finite values");
}

}  // namespace

std::string_view to_string(LatticeKind kind) {
  switch (kind) {
    case LatticeKind::identity: return "identity";
    case LatticeKind::hexagonal: return "hexagonal";
    case LatticeKind::e8: return "e8";
    case LatticeKind::custom: return "custom";
  }
  return "custom";
}

LatticeSpec::LatticeSpec(LatticeKind kind, Eigen::MatrixXd generator, double scale)
    : kind_(kind), generator_(std::move(generator)), scale_(scale) {
  if (!(scale_ > 0.0) || !std::isfinite(scale_))
    throw ConfigError("lattice scale must be positive and finite");
  if (generator_.rows() == 0 || generator_.rows() != generator_.cols())
    throw ConfigError("lattice generator must be square and non-empty");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(generator_);
  if (!lu.isInvertible() || std::abs(lu.determinant()) <= 1e-12)
    throw ConfigError("lattice generator must be full rank");
  generator_inverse_ = lu.inverse();
}

LatticeSpec LatticeSpec::identity(double scale) {
  return LatticeSpec(LatticeKind::identity, Eigen::MatrixXd::Identity(1, 1), scale);
}

LatticeSpec LatticeSpec::hexagonal(double scale) {
  return LatticeSpec(LatticeKind::hexagonal, hexagonal_generator(), scale);
}

LatticeSpec LatticeSpec::e8(double scale) {
  return LatticeSpec(LatticeKind::e8, e8_generator(), scale);
}

LatticeSpec LatticeSpec::custom(Eigen::MatrixXd generator, double scale) {
  return LatticeSpec(LatticeKind::custom, std::move(generator), scale);
}

LatticeSpec LatticeSpec::from_name(std::string_view name, double scale) {
  if (name == "identity") return identity(scale);
  if (name == "hexagonal") return hexagonal(scale);
  if (name == "e8") return e8(scale);
  throw ConfigError("unknown lattice '" + std::string(name) + "'");
}

double LatticeSpec::packing_radius() const {
  switch (kind_) {
    case LatticeKind::identity:
    case LatticeKind::hexagonal:
      return 0.5 * scale_;
    case LatticeKind::e8:
      return 0.5 * std::sqrt(2.0) * scale_;
    case LatticeKind::custom:
      break;
  }
  const int n = block_dim();
  double best = generator_.colwise().norm().minCoeff();
  if (n <= 6) {
    // Shortest vector over a small coefficient box.
    Eigen::VectorXi z = Eigen::VectorXi::Constant(n, -2);
    while (true) {
      if (!z.isZero()) best = std::min(best, (generator_ * z.cast<double>()).norm());
      int i = 0;
      while (i < n && z(i) == 2) z(i++) = -2;
      if (i == n) break;
      ++z(i);
    }
  }
  return 0.5 * best * scale_;
}

void LatticeSpec::decode_unscaled(const double* y, double* out) const {
  switch (kind_) {
    case LatticeKind::identity:
      out[0] = round_half_up(y[0]);
      return;
    case LatticeKind::hexagonal:
      decode_hexagonal(y, out);
      return;
    case LatticeKind::e8:
      decode_e8(y, out);
      return;
    case LatticeKind::custom:
      break;
  }
  const int n = block_dim();
  Eigen::Map<const Eigen::VectorXd> yv(y, n);
  Eigen::VectorXd z = (generator_inverse_ * yv).unaryExpr([](double v) { return round_half_up(v); });
  Eigen::Map<Eigen::VectorXd>(out, n) = generator_ * z;
}

NearestPoint LatticeSpec::nearest_point(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != block_dim())
    throw ConfigError("nearest_point: dimension " + std::to_string(x.size()) +
                      " does not match block dimension " + std::to_string(block_dim()));
  check_finite(x);
  Eigen::VectorXd y = x / scale_;
  NearestPoint result{Eigen::VectorXd(block_dim()), !exact()};
  decode_unscaled(y.data(), result.point.data());
  result.point *= scale_;
  return result;
}

Eigen::VectorXd LatticeSpec::quantize(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const int n = block_dim();
  if (x.size() % n != 0)
    throw ConfigError("quantize: length " + std::to_string(x.size()) +
                      " is not a multiple of block dimension " + std::to_string(n));
  check_finite(x);
  Eigen::VectorXd y = x / scale_;
  Eigen::VectorXd out(x.size());
  for (Eigen::Index off = 0; off < x.size(); off += n) decode_unscaled(y.data() + off, out.data() + off);
  out *= scale_;
  return out;
}

Eigen::VectorXd LatticeSpec::coordinates(const Eigen::Ref<const Eigen::VectorXd>& point) const {
  if (point.size() != block_dim()) throw ConfigError("coordinates: dimension mismatch");
  return (generator_inverse_ * (point / scale_)).unaryExpr([](double v) { return std::round(v); });
}

void LatticeSpec::set_second_moment(double value) {
  if (!(value > 0.0) || !std::isfinite(value)) throw ConfigError("second moment must be positive");
  second_moment_ = value;
}

DitherVector sample_dither(const LatticeSpec& lattice, Eigen::Index size, Rng& rng) {
  const int n = lattice.block_dim();
  if (size <= 0 || size % n != 0)
    throw ConfigError("dither length " + std::to_string(size) +
                      " must be a positive multiple of block dimension " + std::to_string(n));
  const Eigen::MatrixXd g = lattice.scaled_generator();
  DitherVector d{Eigen::VectorXd(size)};
  Eigen::VectorXd unit(n);
  for (Eigen::Index off = 0; off < size; off += n) {
    for (int i = 0; i < n; ++i) unit(i) = uniform01(rng);
    const Eigen::VectorXd u = g * unit;
    d.values.segment(off, n) = u - lattice.nearest_point(u).point;
  }
  return d;
}

double estimate_second_moment(const LatticeSpec& lattice, std::size_t num_samples, Rng& rng) {
  if (num_samples < kMinSecondMomentSamples)
    throw ConfigError("second moment estimation needs at least " +
                      std::to_string(kMinSecondMomentSamples) + " samples");
  const int n = lattice.block_dim();
  double total = 0.0;
  for (std::size_t i = 0; i < num_samples; ++i)
    total += sample_dither(lattice, n, rng).values.squaredNorm();
  return total / (static_cast<double>(n) * static_cast<double>(num_samples));
}

double second_moment(LatticeSpec& lattice, std::size_t num_samples, Rng& rng) {
  if (auto cached = lattice.cached_second_moment()) return *cached;
  double value;
  if (lattice.kind() == LatticeKind::identity) {
    value = lattice.scale() * lattice.scale() / 12.0;
  } else {
    value = estimate_second_moment(lattice, num_samples, rng);
  }
  lattice.set_second_moment(value);
  return value;
}

}  // namespace fedcpu
