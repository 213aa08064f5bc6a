#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "oracles.hpp"
#include "uvaa/error.hpp"
#include "uvaa/physics.hpp"

using namespace uvaa;
using namespace uvaa::physics;
using std::numbers::pi;

namespace {

SwarmLayout colocated(int n, double w = 1.0) {
  SwarmLayout l;
  for (int i = 0; i < n; ++i) {
    l.positions.push_back({0.0, 0.0, 0.0});
    l.weights.push_back(w);
  }
  return l;
}

SwarmLayout random_layout(int n, double extent, Rng& rng) {
  SwarmLayout l;
  for (int i = 0; i < n; ++i) {
    l.positions.push_back({rng.uniform(0, extent), rng.uniform(0, extent), rng.uniform(0, extent)});
    l.weights.push_back(rng.uniform(0.1, 1.0));
  }
  return l;
}

}  // namespace

TEST(ArrayFactor, SingleElementAtOrigin) {
  const auto af = array_factor(colocated(1), {0.7, -1.2}, 0.125);
  EXPECT_NEAR(af.real(), 1.0, 1e-12);
  EXPECT_NEAR(af.imag(), 0.0, 1e-12);
}

TEST(ArrayFactor, ColocatedSumsCoherently) {
  const auto af = array_factor(colocated(4), {2.0, 0.3}, 0.125);
  EXPECT_NEAR(af.real(), 4.0, 1e-12);
  EXPECT_NEAR(af.imag(), 0.0, 1e-12);
}

TEST(ArrayFactor, HalfWavelengthPairCancelsBroadside) {
  const double lambda = 0.125;
  SwarmLayout l = colocated(2);
  l.positions[1] = {lambda / 2, 0.0, 0.0};
  const auto af = array_factor(l, {pi / 2, 0.0}, lambda);
  EXPECT_NEAR(std::abs(af), 0.0, 1e-12);
}

TEST(ArrayFactor, BoundedByWeightSum) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto l = random_layout(6, 3.0, rng);
    double sum = 0.0;
    for (double w : l.weights) sum += w;
    const Direction d{rng.uniform(0, pi), rng.uniform(-pi, pi)};
    EXPECT_LE(std::abs(array_factor(l, d, 0.125)), sum + 1e-12);
  }
}

TEST(ElementPattern, Isotropic) {
  EXPECT_EQ(element_pattern({0.0, 0.0}), 1.0);
  EXPECT_EQ(element_pattern({pi / 2, pi}), 1.0);
  EXPECT_EQ(element_pattern({1.1, -2.0}), 1.0);
}

TEST(GaussLegendre, IntegratesPolynomialsExactly) {
  const auto gl = gauss_legendre(8);
  // exact for degree <= 15
  double s = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) s += gl.weights[i] * std::pow(gl.nodes[i], 14);
  EXPECT_NEAR(s, 2.0 / 15.0, 1e-14);
}

TEST(ArrayGain, SingleElementIsEfficiency) {
  ChannelParams p;
  EXPECT_NEAR(array_gain(colocated(1), {1.0, 0.5}, p, {}), 1.0, 1e-10);
  p.antenna_efficiency = 0.8;
  EXPECT_NEAR(array_gain(colocated(1), {1.0, 0.5}, p, {}), 0.8, 1e-10);
}

TEST(ArrayGain, ColocatedSwarmIsEfficiency) {
  ChannelParams p;
  EXPECT_NEAR(array_gain(colocated(8), {0.4, 2.0}, p, {}), 1.0, 1e-3);
  p.antenna_efficiency = 0.8;
  EXPECT_NEAR(array_gain(colocated(8), {0.4, 2.0}, p, {}), 0.8, 1e-3);
}

TEST(ArrayGain, AllZeroWeightsAreDegenerate) {
  EXPECT_THROW(array_gain(colocated(3, 0.0), {1.0, 0.0}, {}, {}), DegenerateArray);
  EXPECT_THROW(array_gain_closed_form(colocated(3, 0.0), {1.0, 0.0}, {}), DegenerateArray);
}

TEST(ArrayGain, InvariantToWeightScaling) {
  Rng rng(11);
  ChannelParams p;
  const auto base = random_layout(5, 0.3, rng);
  const Direction d{1.2, 0.4};
  const double g = array_gain(base, d, p, {});
  for (double s : {0.5, 0.25, 0.1}) {
    SwarmLayout l = base;
    for (double& w : l.weights) w *= s;
    EXPECT_NEAR(array_gain(l, d, p, {}) / g, 1.0, 1e-9);
  }
}

TEST(ArrayGain, QuadratureMatchesClosedFormOnCompactSwarm) {
  Rng rng(5);
  ChannelParams p;
  for (int trial = 0; trial < 10; ++trial) {
    const auto l = random_layout(6, 0.4, rng);
    const double q = radiation_integral(l, p, {});
    const double c = radiation_integral_closed_form(l, p);
    EXPECT_NEAR(q / c, 1.0, 1e-6);
  }
}

TEST(ArrayGain, SphereAverageIsEfficiency) {
  // directivity normalization: the sin-weighted sphere mean of the gain is eta
  Rng rng(8);
  ChannelParams p;
  const auto l = random_layout(4, 0.3, rng);
  const auto gl = gauss_legendre(64);
  const int n_phi = 128;
  double mean = 0.0;
  for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
    const double theta = pi / 2 * (gl.nodes[i] + 1.0);
    for (int k = 0; k < n_phi; ++k) {
      const double phi = -pi + 2 * pi * k / n_phi;
      mean += gl.weights[i] * (pi / 2) * std::sin(theta) * (2 * pi / n_phi) *
              array_gain_closed_form(l, {theta, phi}, p);
    }
  }
  EXPECT_NEAR(mean / (4 * pi), 1.0, 1e-3);
}

TEST(ArrayGain, NodeDoublingIsStableOnCompactSwarm) {
  Rng rng(9);
  ChannelParams p;
  const auto l = random_layout(16, 0.5, rng);
  const Direction d{2.0, 1.0};
  const double a = array_gain(l, d, p, {64, 128});
  const double b = array_gain(l, d, p, {128, 256});
  EXPECT_LT(std::abs(a - b) / b, 5e-3);
}

TEST(Rician, MeanConverges) {
  Rng rng(17);
  double s = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) s += sample_rician(5.0, 1.0, rng);
  EXPECT_NEAR(s / n, 1.0, 0.01);
}

TEST(Rician, ZeroKIsExponential) {
  Rng rng(23);
  std::vector<double> xs(100000);
  for (double& x : xs) x = sample_rician(0.0, 1.0, rng);
  const double p = oracle::ks_p_value(xs, [](double x) { return 1.0 - std::exp(-x); });
  EXPECT_GT(p, 0.01);
}

TEST(Rician, LargeKIsDeterministic) {
  Rng rng(29);
  for (int i = 0; i < 1000; ++i) EXPECT_NEAR(sample_rician(1e6, 1.0, rng), 1.0, 1e-2);
}

TEST(ChannelGain, PowerLaw) {
  ChannelParams p;
  p.k0 = 1.0;
  p.alpha = 2.0;
  EXPECT_DOUBLE_EQ(channel_gain(10.0, p, 1.0), 0.01);
  EXPECT_DOUBLE_EQ(channel_gain(1.0, p, 2.0), 2.0);
  EXPECT_DOUBLE_EQ(channel_gain(6.0, p, 1.0) / channel_gain(12.0, p, 1.0), 4.0);
  EXPECT_THROW(channel_gain(0.0, p, 1.0), ZeroDistance);
}

TEST(ChannelGain, DefaultConstantIsFreeSpace) {
  ChannelParams p;
  const double r = p.wavelength / (4 * pi);
  EXPECT_DOUBLE_EQ(p.path_loss_constant(), r * r);
}

TEST(Sinr, Identities) {
  const double n = 2e-13;
  EXPECT_DOUBLE_EQ(sinr(1.0, 1.0, n, 0.0, 0.1, 1.0, n), 1.0);
  EXPECT_DOUBLE_EQ(sinr(0.0, 1.0, 1.0, 1.0, 0.1, 1.0, n), 0.0);
  EXPECT_NEAR(sinr(3.0, 1.0, n, 2.0, 1.0, n, n), 1.0, 1e-15);
}

TEST(Rate, Identities) {
  EXPECT_EQ(achievable_rate(0.0), 0.0);
  EXPECT_EQ(achievable_rate(1.0), 1.0);
  EXPECT_EQ(achievable_rate(3.0), 2.0);
  double prev = -1.0;
  for (double s = 0.0; s < 100.0; s += 0.37) {
    EXPECT_GT(achievable_rate(s), prev);
    prev = achievable_rate(s);
  }
}

TEST(DirectionTo, Axes) {
  auto d = direction_to({0, 0, 1}, {0, 0, 0});
  EXPECT_NEAR(d.theta, pi, 1e-12);
  EXPECT_NEAR(d.phi, 0.0, 1e-12);
  d = direction_to({0, 0, 0}, {1, 0, 0});
  EXPECT_NEAR(d.theta, pi / 2, 1e-12);
  EXPECT_NEAR(d.phi, 0.0, 1e-12);
  d = direction_to({0, 0, 0}, {0, 1, 0});
  EXPECT_NEAR(d.theta, pi / 2, 1e-12);
  EXPECT_NEAR(d.phi, pi / 2, 1e-12);
  EXPECT_THROW(direction_to({1, 2, 3}, {1, 2, 3}), CoincidentPoints);
}

TEST(TxPower, ScalesWithSquaredWeights) {
  ChannelParams p;
  SwarmLayout l = colocated(3);
  l.weights = {1.0, 0.5, 0.0};
  EXPECT_DOUBLE_EQ(uvaa_tx_power(l, p), 0.1 * 1.25);
}

TEST(Layout, Validation) {
  SwarmLayout l = colocated(2);
  l.weights[0] = 1.5;
  EXPECT_THROW(l.validate(), std::invalid_argument);
  EXPECT_THROW(SwarmLayout{}.validate(), std::invalid_argument);
}
