#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fedcpu/encoder.hpp"
#include "fedcpu/errors.hpp"
#include "fedcpu/oracles.hpp"

using namespace fedcpu;

TEST(Normalize, WorkedExample) {
  const NormalizedUpdate nu = normalize_update({Eigen::Vector3d(1.0, 2.0, 3.0), 0});
  EXPECT_DOUBLE_EQ(nu.mean, 2.0);
  EXPECT_NEAR(nu.std * nu.std, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(nu.w_hat(0), -std::sqrt(1.5), 1e-15);
  EXPECT_NEAR(nu.w_hat(1), 0.0, 1e-15);
  EXPECT_NEAR(nu.w_hat(2), std::sqrt(1.5), 1e-15);
}

TEST(Normalize, ConstantUpdateIsDegenerate) {
  const LocalUpdate u{Eigen::VectorXd::Constant(5, 0.3), 4};
  EXPECT_THROW(normalize_update(u), DegenerateUpdateError);
  bool degenerate = false;
  const NormalizedUpdate nu = normalize_update_or_floor(u, &degenerate);
  EXPECT_TRUE(degenerate);
  EXPECT_TRUE(nu.w_hat.isZero(0.0));
  EXPECT_DOUBLE_EQ(nu.std, kSigmaFloor);
  EXPECT_DOUBLE_EQ(nu.mean, 0.3);
}

TEST(Normalize, RejectsShortAndNonFinite) {
  EXPECT_THROW(normalize_update({Eigen::VectorXd::Ones(1), 0}), ConfigError);
  Eigen::VectorXd bad = Eigen::VectorXd::LinSpaced(4, 0.0, 1.0);
  bad(2) = std::nan("");
  EXPECT_THROW(normalize_update({bad, 0}), std::invalid_argument);
}

TEST(Normalize, RandomVectorHasUnitMoments) {
  Rng rng = make_rng(1);
  std::normal_distribution<double> normal(3.0, 7.0);
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd v(37);
    for (auto& x : v) x = normal(rng);
    const NormalizedUpdate nu = normalize_update({v, t});
    const double n = static_cast<double>(v.size());
    EXPECT_NEAR(nu.w_hat.sum() / n, 0.0, 1e-9);
    EXPECT_NEAR(nu.w_hat.squaredNorm() / n, 1.0, 1e-9);
    // Round trip.
    const Eigen::VectorXd back = (nu.std * nu.w_hat).array() + nu.mean;
    EXPECT_LT((back - v).lpNorm<Eigen::Infinity>(), 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff()));
  }
}

TEST(DitheredQuantize, IdentityExample) {
  const NormalizedUpdate nu{Eigen::VectorXd::Constant(1, 0.2), 0.0, 1.0};
  const DitherVector d{Eigen::VectorXd::Constant(1, 0.4)};
  EXPECT_DOUBLE_EQ(dithered_quantize(nu, LatticeSpec::identity(), d)(0), 1.0);
}

TEST(DitheredQuantize, LatticePointIsFixedWithZeroDither) {
  const LatticeSpec e8 = LatticeSpec::e8(1.5);
  Eigen::VectorXd z(16);
  z << 1, -2, 0, 3, 1, 1, 0, -1, 2, 0, 0, 0, 1, -1, 1, 1;
  Eigen::VectorXd w(16);
  w.head(8) = e8.scaled_generator() * z.head(8);
  w.tail(8) = e8.scaled_generator() * z.tail(8);
  const NormalizedUpdate nu{w, 0.0, 1.0};
  EXPECT_TRUE(dithered_quantize(nu, e8, {Eigen::VectorXd::Zero(16)}).isApprox(w, 1e-12));
}

TEST(DitheredQuantize, HexagonalBlocksMatchEnumeration) {
  Rng rng = make_rng(2);
  const LatticeSpec hex = LatticeSpec::hexagonal(0.8);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w(40);
  for (auto& v : w) v = normal(rng);
  const DitherVector d = sample_dither(hex, 40, rng);
  const Eigen::VectorXd q = dithered_quantize({w, 0.0, 1.0}, hex, d);
  for (int b = 0; b < 20; ++b) {
    const Eigen::VectorXd y = w.segment(2 * b, 2) + d.values.segment(2 * b, 2);
    const Eigen::VectorXd want = oracle::enumerate_nearest_point(hex, y);
    EXPECT_NEAR((y - q.segment(2 * b, 2)).norm(), (y - want).norm(), 1e-12);
  }
}

TEST(DitheredQuantize, LengthMismatchIsConfigError) {
  EXPECT_THROW(dithered_quantize({Eigen::VectorXd::Zero(8), 0, 1}, LatticeSpec::e8(),
                                 {Eigen::VectorXd::Zero(16)}),
               ConfigError);
}

TEST(Transmit, GainExamples) {
  EXPECT_NEAR(transmit_gain(1.0, 0.5), std::sqrt(0.5), 1e-15);
  EXPECT_DOUBLE_EQ(transmit_gain(4.0, 0.0), 2.0);
  EXPECT_THROW(transmit_gain(0.0, 0.1), ConfigError);
  const TransmitSignal sig = scale_for_transmit(Eigen::Vector2d(1.0, -2.0), {Eigen::Vector2d::Zero()}, 1.0, 0.5);
  EXPECT_TRUE(sig.x.isApprox(std::sqrt(0.5) * Eigen::Vector2d(1.0, -2.0)));
  EXPECT_TRUE(sig.quantized_point.isApprox(Eigen::Vector2d(1.0, -2.0)));
}

TEST(Transmit, AveragePowerWithinBudget) {
  Rng rng = make_rng(3);
  const LatticeSpec id = LatticeSpec::identity(1.0);
  const double sq2 = 1.0 / 12.0, power = 1.0;
  const int s = 16, trials = 10000;
  std::normal_distribution<double> normal(0.0, 1.0);
  double sum = 0.0, sum2 = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd v(s);
    for (auto& x : v) x = normal(rng);
    const NormalizedUpdate nu = normalize_update({v, 0});
    DitherVector d = sample_dither(id, s, rng);
    const TransmitSignal sig = scale_for_transmit(dithered_quantize(nu, id, d), d, power, sq2);
    const double p = sig.x.squaredNorm() / s;
    sum += p;
    sum2 += p * p;
  }
  const double mean = sum / trials;
  const double se = std::sqrt((sum2 / trials - mean * mean) / trials);
  EXPECT_LE(mean, power + 3.0 * se);
}

TEST(Transmit, DevicesAreUncorrelated) {
  Rng rng = make_rng(4);
  const LatticeSpec hex = LatticeSpec::hexagonal(1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int s = 8, trials = 20000;
  double cross = 0.0, p1 = 0.0, p2 = 0.0;
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd a(s), b(s);
    for (auto& x : a) x = normal(rng);
    for (auto& x : b) x = normal(rng);
    const NormalizedUpdate na = normalize_update({a, 0}), nb = normalize_update({b, 1});
    const Eigen::VectorXd qa = dithered_quantize(na, hex, sample_dither(hex, s, rng));
    const Eigen::VectorXd qb = dithered_quantize(nb, hex, sample_dither(hex, s, rng));
    cross += qa.dot(qb);
    p1 += qa.squaredNorm();
    p2 += qb.squaredNorm();
  }
  const double corr = cross / std::sqrt(p1 * p2);
  EXPECT_LT(std::abs(corr), 4.0 / std::sqrt(static_cast<double>(trials * s)));
}
