#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "fedcpu/rng.hpp"

namespace fedcpu {

enum class LatticeKind { identity, hexagonal, e8, custom };

std::string_view to_string(LatticeKind kind);

/// Result of a single-block nearest-point query.
struct NearestPoint {
  Eigen::VectorXd point;
  /// True when the decoder is Babai rounding rather than an exact search.
  bool approximate = false;
};

/// A block lattice rho * G used blockwise over a length-s vector.
///
/// Generator columns are the basis vectors, so lattice points are
/// rho * G * z for integer z. Identity, hexagonal (A2) and E8 carry exact
/// nearest-point decoders; custom generators fall back to Babai rounding.
class LatticeSpec {
 public:
  static LatticeSpec identity(double scale = 1.0);
  static LatticeSpec hexagonal(double scale = 1.0);
  static LatticeSpec e8(double scale = 1.0);
  static LatticeSpec custom(Eigen::MatrixXd generator, double scale = 1.0);
  /// "identity", "hexagonal" or "e8".
  static LatticeSpec from_name(std::string_view name, double scale = 1.0);

  LatticeKind kind() const { return kind_; }
  std::string_view name() const { return to_string(kind_); }
  int block_dim() const { return static_cast<int>(generator_.rows()); }
  double scale() const { return scale_; }
  /// Unscaled generator G.
  const Eigen::MatrixXd& generator() const { return generator_; }
  Eigen::MatrixXd scaled_generator() const { return scale_ * generator_; }
  bool exact() const { return kind_ != LatticeKind::custom; }

  /// Half the minimum distance between points of rho * G.
  double packing_radius() const;

  NearestPoint nearest_point(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Blockwise Q(x) for a vector whose length is a multiple of block_dim().
  Eigen::VectorXd quantize(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Integer coordinates z with point = rho * G * z (rounded least squares).
  Eigen::VectorXd coordinates(const Eigen::Ref<const Eigen::VectorXd>& point) const;

  std::optional<double> cached_second_moment() const { return second_moment_; }
  void set_second_moment(double value);

 private:
  LatticeSpec(LatticeKind kind, Eigen::MatrixXd generator, double scale);

  // Decodes one block given in unscaled coordinates, writing into out.
  void decode_unscaled(const double* y, double* out) const;

  LatticeKind kind_;
  Eigen::MatrixXd generator_;
  Eigen::MatrixXd generator_inverse_;
  double scale_;
  std::optional<double> second_moment_;
};

/// Dither blocks, each uniform over the Voronoi cell of the block lattice.
struct DitherVector {
  Eigen::VectorXd values;
};

/// Draws u uniform over the fundamental parallelepiped and folds it into
/// the Voronoi cell as u - Q(u).
DitherVector sample_dither(const LatticeSpec& lattice, Eigen::Index size, Rng& rng);

/// Monte-Carlo per-dimension second moment, no caching.
double estimate_second_moment(const LatticeSpec& lattice, std::size_t num_samples,
                              Rng& rng);

/// Per-dimension second moment, cached on the spec. The identity lattice uses
/// rho^2 / 12 directly; other lattices are estimated by Monte Carlo.
double second_moment(LatticeSpec& lattice, std::size_t num_samples, Rng& rng);

inline constexpr std::size_t kMinSecondMomentSamples = 10000;

}  // namespace fedcpu
