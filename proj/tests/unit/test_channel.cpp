#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fedcpu/channel.hpp"
#include "fedcpu/errors.hpp"

using namespace fedcpu;

TEST(Channel, RealStackingExample) {
  Eigen::MatrixXcd h(1, 1);
  h(0, 0) = {1.0, 2.0};
  const ChannelRealization r = ChannelRealization::from_complex(h);
  ASSERT_EQ(r.h_real.rows(), 2);
  EXPECT_DOUBLE_EQ(r.h_real(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.h_real(1, 0), 2.0);
  EXPECT_EQ(r.antennas(), 1);
  EXPECT_EQ(r.devices(), 1);
}

TEST(Channel, SampledRealFormMatchesComplex) {
  Rng rng = make_rng(1);
  ChannelConfig cfg;
  cfg.antennas = 4;
  cfg.devices = 3;
  const ChannelRealization r = sample_channel(cfg, rng);
  EXPECT_TRUE(r.h_real.topRows(4).isApprox(r.h_complex.real()));
  EXPECT_TRUE(r.h_real.bottomRows(4).isApprox(r.h_complex.imag()));
}

TEST(Channel, PhaseIsUniform) {
  Rng rng = make_rng(2);
  ChannelConfig cfg;
  cfg.antennas = 100;
  cfg.devices = 1000;
  const ChannelRealization r = sample_channel(cfg, rng);
  const int bins = 10;
  std::vector<double> counts(bins, 0.0);
  for (Eigen::Index i = 0; i < r.h_complex.size(); ++i) {
    double phi = std::arg(r.h_complex.data()[i]);
    if (phi < 0) phi += 2.0 * std::numbers::pi;
    counts[std::min(bins - 1, static_cast<int>(phi / (2.0 * std::numbers::pi) * bins))] += 1.0;
  }
  const double expected = static_cast<double>(r.h_complex.size()) / bins;
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 21.666);  // chi-square 99th percentile, 9 dof
}

TEST(Channel, PowerGainFollowsExponentialLaw) {
  Rng rng = make_rng(3);
  ChannelConfig cfg;
  cfg.antennas = 100;
  cfg.devices = 1000;
  cfg.fading_rate = 5.0;
  const ChannelRealization r = sample_channel(cfg, rng);
  const Eigen::ArrayXd p = r.h_complex.array().abs2().reshaped();
  const double mean = p.mean();
  const double se = std::sqrt((p - mean).square().sum() / (p.size() - 1) / p.size());
  EXPECT_NEAR(mean, 1.0 / 5.0, 3.0 * se);

  cfg.law = FadingLaw::gain_exponential;
  const ChannelRealization g = sample_channel(cfg, rng);
  const Eigen::ArrayXd a = g.h_complex.array().abs().reshaped();
  const double gmean = a.mean();
  const double gse = std::sqrt((a - gmean).square().sum() / (a.size() - 1) / a.size());
  EXPECT_NEAR(gmean, 1.0 / 5.0, 3.0 * gse);
}

TEST(Channel, SameSeedSameRealization) {
  ChannelConfig cfg;
  Rng a = make_rng(77), b = make_rng(77);
  EXPECT_EQ(sample_channel(cfg, a).h_real, sample_channel(cfg, b).h_real);
}

TEST(Channel, ConfigValidation) {
  ChannelConfig cfg;
  cfg.antennas = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.snr = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.power = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(fading_law_from_string("rician"), ConfigError);
  EXPECT_DOUBLE_EQ(ChannelConfig{}.noise_variance(), 0.1);
}

TEST(Propagate, NoiselessIdentity) {
  Eigen::MatrixXcd h(1, 1);
  h(0, 0) = 1.0;
  const ChannelRealization r = ChannelRealization::from_complex(h);
  Rng rng = make_rng(1);
  Eigen::MatrixXd x(1, 3);
  x << 0.5, -1.0, 2.0;
  const Eigen::MatrixXd y = propagate(r, x, 0.0, rng);
  EXPECT_TRUE(y.row(0).isApprox(x.row(0)));
  EXPECT_TRUE(y.row(1).isZero(0.0));
}

TEST(Propagate, NoiseOnlyVariance) {
  Rng rng = make_rng(4);
  ChannelConfig cfg;
  cfg.antennas = 50;
  cfg.devices = 2;
  const ChannelRealization r = sample_channel(cfg, rng);
  const Eigen::MatrixXd y = propagate(r, Eigen::MatrixXd::Zero(2, 1000), 0.3, rng);
  EXPECT_NEAR(y.squaredNorm() / y.size(), 0.3, 0.02 * 0.3);
  EXPECT_NEAR(y.mean(), 0.0, 4.0 * std::sqrt(0.3 / y.size()));
}

TEST(Propagate, SuperpositionAndLinearity) {
  Rng rng = make_rng(5);
  ChannelConfig cfg;
  cfg.antennas = 3;
  cfg.devices = 2;
  const ChannelRealization r = sample_channel(cfg, rng);
  const Eigen::MatrixXd x1 = Eigen::MatrixXd::Random(2, 6), x2 = Eigen::MatrixXd::Random(2, 6);
  const Eigen::MatrixXd y = propagate(r, x1, 0.0, rng);
  const Eigen::MatrixXd direct = r.h_real.col(0) * x1.row(0) + r.h_real.col(1) * x1.row(1);
  EXPECT_TRUE(y.isApprox(direct, 1e-12));
  EXPECT_TRUE(propagate(r, x1 + x2, 0.0, rng)
                  .isApprox(propagate(r, x1, 0.0, rng) + propagate(r, x2, 0.0, rng), 1e-12));
}

TEST(Propagate, ShapeMismatch) {
  Rng rng = make_rng(6);
  ChannelConfig cfg;
  cfg.devices = 3;
  const ChannelRealization r = sample_channel(cfg, rng);
  EXPECT_THROW(propagate(r, Eigen::MatrixXd::Zero(2, 4), 0.1, rng), ConfigError);
  EXPECT_THROW(propagate(r, Eigen::MatrixXd::Zero(3, 4), -0.1, rng), ConfigError);
}
