#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "fedcpu/channel.hpp"
#include "fedcpu/encoder.hpp"
#include "fedcpu/errors.hpp"
#include "fedcpu/receiver.hpp"

using namespace fedcpu;

namespace {

ChannelRealization random_channel(int m, int k, Rng& rng) {
  ChannelConfig cfg;
  cfg.antennas = m;
  cfg.devices = k;
  return sample_channel(cfg, rng);
}

// DMSE written out directly from the residual and the equalizer norm.
double direct_dmse(const ChannelRealization& h, const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                   double snr, double sq2, double s) {
  const Eigen::VectorXd r = h.h_real.transpose() * b - a;
  return s * (1.0 + 2.0 * sq2) * (r.squaredNorm() + b.squaredNorm() / snr);
}

ChannelRealization identity_channel() {
  // M = 1, K = 2 with h = (1, i) stacks to the 2x2 identity.
  Eigen::MatrixXcd h(1, 2);
  h(0, 0) = {1.0, 0.0};
  h(0, 1) = {0.0, 1.0};
  return ChannelRealization::from_complex(h);
}

}  // namespace

TEST(Equalizer, ScalarExample) {
  Eigen::MatrixXcd h(1, 1);
  h(0, 0) = 1.0;
  const EqualizerWeights b =
      optimal_equalizer(ChannelRealization::from_complex(h), Eigen::VectorXd::Ones(1), 1.0);
  EXPECT_NEAR(b.b(0), 0.5, 1e-15);
  EXPECT_NEAR(b.b(1), 0.0, 1e-15);
}

TEST(Equalizer, HighSnrIdentityChannel) {
  const Eigen::Vector2d a(3.0, 1.0);
  const EqualizerWeights b = optimal_equalizer(identity_channel(), a, 1e6);
  EXPECT_LT((b.b - a).norm(), 1e-4 * a.norm());
}

TEST(Equalizer, StationarityAndLocalOptimality) {
  Rng rng = make_rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> coef(0, 4);
  for (int t = 0; t < 30; ++t) {
    const ChannelRealization h = random_channel(6, 4, rng);
    Eigen::VectorXd a(4);
    for (auto& v : a) v = 1 + coef(rng);
    const double snr = 10.0;
    const Eigen::VectorXd b = optimal_equalizer(h, a, snr).b;
    const Eigen::VectorXd grad =
        2.0 * h.h_real * (h.h_real.transpose() * b) - 2.0 * h.h_real * a + (2.0 / snr) * b;
    EXPECT_LT(grad.norm(), 1e-9 * std::max(1.0, a.norm()));
    const double best = direct_dmse(h, a, b, snr, 0.1, 1.0);
    for (int p = 0; p < 100; ++p) {
      Eigen::VectorXd delta(b.size());
      for (auto& v : delta) v = normal(rng);
      delta *= 1e-3 / delta.norm();
      EXPECT_GE(direct_dmse(h, a, b + delta, snr, 0.1, 1.0), best - 1e-12 * best);
    }
  }
}

TEST(DecodingMse, ScalarExample) {
  Eigen::MatrixXcd h(1, 1);
  h(0, 0) = 1.0;
  EXPECT_NEAR(decoding_mse(ChannelRealization::from_complex(h), Eigen::VectorXd::Ones(1), 1.0, 0.0, 1.0),
              0.5, 1e-15);
}

TEST(DecodingMse, VanishesAtHighSnr) {
  Rng rng = make_rng(2);
  const ChannelRealization h = random_channel(8, 3, rng);
  const Eigen::Vector3d a(1, 2, 1);
  EXPECT_LT(decoding_mse(h, a, 1e12, 0.0, 1.0), 1e-9);
}

TEST(DecodingMse, DualFormsAgree) {
  Rng rng = make_rng(3);
  std::uniform_int_distribution<int> coef(1, 5);
  std::uniform_real_distribution<double> log_snr(-1.0, 3.0);
  for (int t = 0; t < 100; ++t) {
    const ChannelRealization h = random_channel(1 + t % 7, 1 + t % 5, rng);
    Eigen::VectorXd a(h.devices());
    for (auto& v : a) v = coef(rng);
    const double snr = std::pow(10.0, log_snr(rng));
    const Eigen::VectorXd b = optimal_equalizer(h, a, snr).b;
    const double closed = decoding_mse(h, a, snr, 0.07, 24.0);
    EXPECT_NEAR(direct_dmse(h, a, b, snr, 0.07, 24.0), closed, 1e-9 * closed);
    EXPECT_NEAR(decoding_mse_at(h, a, b, snr, 0.07, 24.0), closed, 1e-9 * closed);
  }
}

TEST(DecodingMse, DecodingMatrixIsPositiveDefinite) {
  Rng rng = make_rng(4);
  for (int t = 0; t < 20; ++t) {
    const ChannelRealization h = random_channel(2, 6, rng);
    const Eigen::MatrixXd m = decoding_matrix(h, 10.0);
    EXPECT_TRUE(m.isApprox(m.transpose()));
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff(), 0.0);
  }
}

TEST(Decode, NoiselessExactEqualizer) {
  Rng rng = make_rng(5);
  const LatticeSpec lat = LatticeSpec::e8(1.0);
  const double sq2 = 0.0717, power = 2.0;
  const Eigen::Vector2d a(3.0, 1.0);
  const int s = 16;
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(2, s), wbar(2, s);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v(s);
    for (auto& e : v) e = normal(rng);
    DitherVector d = sample_dither(lat, s, rng);
    const TransmitSignal sig =
        scale_for_transmit(dithered_quantize(normalize_update({v, k}), lat, d), d, power, sq2);
    x.row(k) = sig.x.transpose();
    wbar.row(k) = sig.quantized_point.transpose();
  }
  const ChannelRealization h = identity_channel();
  const Eigen::MatrixXd y = propagate(h, x, 0.0, rng);
  const Eigen::VectorXd truth = wbar.transpose() * a;
  const DecodedCombination dc = decode_combination(y, {a}, lat, power, sq2, a.cast<int>(), truth);
  EXPECT_TRUE(dc.point.isApprox(truth, 1e-12));
  ASSERT_TRUE(dc.decode_error.has_value());
  EXPECT_FALSE(*dc.decode_error);
}

TEST(Decode, BoundedNoiseInsideCellIsCorrected) {
  Rng rng = make_rng(6);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const char* name : {"identity", "hexagonal", "e8"}) {
    const LatticeSpec lat = LatticeSpec::from_name(name, 1.5);
    const int n = lat.block_dim(), s = 8 * n / std::gcd(8, n);
    const double sq2 = 0.1, power = 1.0;
    const double scale = std::sqrt((1.0 + 2.0 * sq2) / power);
    const Eigen::Vector2d a(2.0, 1.0);
    for (int t = 0; t < 50; ++t) {
      Eigen::MatrixXd wbar(2, s);
      for (int k = 0; k < 2; ++k) {
        Eigen::VectorXd v(s);
        for (auto& e : v) e = normal(rng);
        wbar.row(k) = lat.quantize(v).transpose();
      }
      const Eigen::MatrixXd x = wbar / scale;
      // Effective noise e, each block strictly inside the packing ball.
      Eigen::VectorXd e(s);
      for (int blk = 0; blk < s / n; ++blk) {
        Eigen::VectorXd u(n);
        for (auto& c : u) c = normal(rng);
        e.segment(blk * n, n) = u * (0.95 * lat.packing_radius() * uniform01(rng) / u.norm());
      }
      const ChannelRealization h = identity_channel();
      const Eigen::MatrixXd y = h.h_real * x + a * e.transpose() / (scale * a.squaredNorm());
      const Eigen::VectorXd truth = wbar.transpose() * a;
      const DecodedCombination dc = decode_combination(y, {a}, lat, power, sq2, a.cast<int>(), truth);
      EXPECT_FALSE(dc.decode_error.value()) << name;
      // A full lattice shift is a decode error.
      const Eigen::VectorXd shift = lat.scaled_generator().col(0);
      Eigen::VectorXd big = Eigen::VectorXd::Zero(s);
      big.head(n) = shift;
      const Eigen::MatrixXd y2 = h.h_real * x + a * big.transpose() / (scale * a.squaredNorm());
      EXPECT_TRUE(decode_combination(y2, {a}, lat, power, sq2, a.cast<int>(), truth).decode_error.value());
    }
  }
}

TEST(Decode, ShapeMismatch) {
  EXPECT_THROW(decode_combination(Eigen::MatrixXd::Zero(4, 8), {Eigen::VectorXd::Zero(2)},
                                  LatticeSpec::e8(), 1.0, 0.1, Eigen::VectorXi::Ones(2)),
               ConfigError);
}

TEST(Eta, Examples) {
  EXPECT_NEAR(optimal_eta(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d::Constant(0.5), 0.0), 2.0, 1e-15);
  EXPECT_NEAR(optimal_eta(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 2), 0.0), 2.0 / 3.0, 1e-15);
  EXPECT_THROW(optimal_eta(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 2), 0.0), ConfigError);
  EXPECT_THROW(optimal_eta(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 0), 0.0), ConfigError);
}

TEST(Eta, BeatsGrid) {
  Rng rng = make_rng(7);
  std::uniform_real_distribution<double> u(0.01, 2.0);
  std::uniform_int_distribution<int> coef(0, 4);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd a(5), sig(5);
    for (auto& v : a) v = coef(rng);
    a(0) += 1;
    for (auto& v : sig) v = u(rng);
    const double sq2 = u(rng) * 0.5;
    const double eta = optimal_eta(a, sig, sq2);
    const double best = quantization_mse_at(a, sig, sq2, 10.0, eta);
    EXPECT_NEAR(quantization_mse(a, sig, sq2, 10.0), best, 1e-9 * best);
    for (int g = 0; g < 1000; ++g) {
      const double e = eta * std::pow(10.0, -2.0 + 4.0 * g / 999.0);
      EXPECT_LE(best, quantization_mse_at(a, sig, sq2, 10.0, e) * (1 + 1e-12));
    }
  }
}

TEST(Qmse, Examples) {
  const double s = 24.0, sq2 = 0.3;
  Eigen::Vector3d e1(1, 0, 0), sig(0.7, 0.2, 1.1);
  EXPECT_NEAR(quantization_mse(e1, sig, sq2, s), s * 0.49 * sq2 / (1 + sq2), 1e-12);
  const Eigen::Vector3d a(1, 2, 2);
  const Eigen::Vector3d eq = Eigen::Vector3d::Constant(0.4);
  EXPECT_NEAR(quantization_mse(a, eq, sq2, s), s * 0.16 * (sq2 / (1 + sq2)) * 9.0 / 25.0, 1e-12);
  EXPECT_NEAR(quantization_mse(a, eq, 0.0, s), 0.0, 1e-15);
}

TEST(Estimate, TwoDeviceWorkedExample) {
  Rng rng = make_rng(8);
  const LatticeSpec lat = LatticeSpec::hexagonal(1.0);
  const double sq2 = 5.0 / 72.0;
  const int s = 10;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<NormalizedUpdate> nus;
  Eigen::MatrixXd d(2, s), wbar(2, s);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v(s);
    for (auto& e : v) e = normal(rng) * (k + 1) + k;
    nus.push_back(normalize_update({v, k}));
    const DitherVector dv = sample_dither(lat, s, rng);
    d.row(k) = dv.values.transpose();
    wbar.row(k) = dithered_quantize(nus.back(), lat, dv).transpose();
  }
  const Eigen::Vector2i a(3, 1);
  const Eigen::VectorXd point = 3.0 * wbar.row(0).transpose() + wbar.row(1).transpose();
  const Eigen::Vector2d means(nus[0].mean, nus[1].mean), sigmas(nus[0].std, nus[1].std);
  const double eta = optimal_eta(a.cast<double>(), sigmas, sq2);
  const GlobalUpdateEstimate est = estimate_global_update({point, a, false}, d, means, sigmas, eta, sq2);
  const Eigen::VectorXd want =
      (3.0 * wbar.row(0).transpose() + wbar.row(1).transpose() - 3.0 * d.row(0).transpose() -
       d.row(1).transpose()) / (4.0 * eta) +
      Eigen::VectorXd::Constant(s, (3.0 * means(0) + means(1)) / 4.0);
  EXPECT_TRUE(est.delta_w_g.isApprox(want, 1e-12));
  EXPECT_GT(est.eta, 0.0);
  EXPECT_NEAR(est.qmse, quantization_mse_at(a.cast<double>(), sigmas, sq2, s, eta), 1e-15);
}

TEST(Estimate, RejectsZeroSum) {
  EXPECT_THROW(estimate_global_update({Eigen::VectorXd::Zero(2), Eigen::Vector2i(0, 0), false},
                                      Eigen::MatrixXd::Zero(2, 2), Eigen::Vector2d::Zero(),
                                      Eigen::Vector2d::Ones(), 1.0, 0.1),
               ConfigError);
}

TEST(Estimate, FineLatticeLimitIsFedAvg) {
  // Equal per-device spread, a = 1, fine lattice: the estimate is the plain average.
  Rng rng = make_rng(9);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int k = 4, s = 16;
  for (double rho : {1e-2, 1e-3}) {
    LatticeSpec lat = LatticeSpec::e8(rho);
    Rng mc = make_rng(1);
    const double sq2 = second_moment(lat, 20000, mc);
    std::vector<LocalUpdate> ups;
    Eigen::MatrixXd d(k, s);
    Eigen::VectorXd point = Eigen::VectorXd::Zero(s), means(k), sigmas(k);
    for (int i = 0; i < k; ++i) {
      Eigen::VectorXd v(s);
      for (auto& e : v) e = normal(rng);
      const NormalizedUpdate base = normalize_update({v, i});
      v = 0.3 * base.w_hat.array() + 0.1 * i;  // std exactly 0.3 for every device
      ups.push_back({v, i});
      const NormalizedUpdate nu = normalize_update(ups.back());
      const DitherVector dv = sample_dither(lat, s, rng);
      d.row(i) = dv.values.transpose();
      point += dithered_quantize(nu, lat, dv);
      means(i) = nu.mean;
      sigmas(i) = nu.std;
    }
    const Eigen::VectorXi a = Eigen::VectorXi::Ones(k);
    const double eta = optimal_eta(a.cast<double>(), sigmas, sq2);
    const Eigen::VectorXd est = estimate_global_update({point, a, false}, d, means, sigmas, eta, sq2).delta_w_g;
    Eigen::VectorXd avg = Eigen::VectorXd::Zero(s);
    for (const auto& u : ups) avg += u.delta_w / k;
    EXPECT_LT((est - avg).lpNorm<Eigen::Infinity>(), 10.0 * 0.3 * std::sqrt(sq2)) << rho;
  }
}
