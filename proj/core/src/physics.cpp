#include "uvaa/physics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "uvaa/error.hpp"

namespace uvaa::physics {

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 unit_vector(double theta, double phi) {
  const double st = std::sin(theta);
  return {st * std::cos(phi), st * std::sin(phi), std::cos(theta)};
}

double weight_sum(const SwarmLayout& layout) {
  double s = 0.0;
  for (double w : layout.weights) s += w;
  return s;
}

}  // namespace

void SwarmLayout::validate() const {
  if (positions.empty()) throw std::invalid_argument("SwarmLayout: empty swarm");
  if (positions.size() != weights.size())
    throw std::invalid_argument("SwarmLayout: positions/weights size mismatch");
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!positions[i].finite())
      throw std::invalid_argument("SwarmLayout: non-finite position at " + std::to_string(i));
    if (!(weights[i] >= 0.0 && weights[i] <= 1.0))
      throw std::invalid_argument("SwarmLayout: weight outside [0,1] at " + std::to_string(i));
  }
}

Vec3 SwarmLayout::centroid() const {
  Vec3 c;
  for (const auto& p : positions) c = c + p;
  return (1.0 / static_cast<double>(positions.size())) * c;
}

void ChannelParams::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("ChannelParams: alpha must be > 0");
  if (!(noise_power > 0.0)) throw std::invalid_argument("ChannelParams: noise_power must be > 0");
  if (!(antenna_efficiency >= 0.0 && antenna_efficiency <= 1.0))
    throw std::invalid_argument("ChannelParams: antenna_efficiency outside [0,1]");
  if (!(wavelength > 0.0)) throw std::invalid_argument("ChannelParams: wavelength must be > 0");
  if (!(rician_k >= 0.0)) throw std::invalid_argument("ChannelParams: rician_k must be >= 0");
  if (!(bs_sidelobe_gain > 0.0))
    throw std::invalid_argument("ChannelParams: bs_sidelobe_gain must be > 0");
  if (!(tx_power_per_uav > 0.0))
    throw std::invalid_argument("ChannelParams: tx_power_per_uav must be > 0");
  if (!(bs_tx_power >= 0.0)) throw std::invalid_argument("ChannelParams: bs_tx_power must be >= 0");
  if (k0 < 0.0) throw std::invalid_argument("ChannelParams: k0 must be >= 0");
}

void QuadratureSpec::validate() const {
  if (n_theta < 8 || n_phi < 8)
    throw std::invalid_argument("QuadratureSpec: node counts must be >= 8");
}

double element_pattern(const Direction&) { return 1.0; }

std::complex<double> array_factor(const SwarmLayout& layout, const Direction& dir,
                                  double wavelength) {
  const double kc = 2.0 * kPi / wavelength;
  const Vec3 u = unit_vector(dir.theta, dir.phi);
  std::complex<double> af{0.0, 0.0};
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const double phase = kc * layout.positions[i].dot(u);
    af += layout.weights[i] * std::complex<double>(std::cos(phase), std::sin(phase));
  }
  return af;
}

GaussLegendre gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  GaussLegendre gl;
  gl.nodes.assign(static_cast<std::size_t>(n), 0.0);
  gl.weights.assign(static_cast<std::size_t>(n), 0.0);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      // P_n'(z) from the three-term recurrence
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * pp * pp);
    gl.nodes[static_cast<std::size_t>(i)] = -z;
    gl.nodes[static_cast<std::size_t>(n - 1 - i)] = z;
    gl.weights[static_cast<std::size_t>(i)] = w;
    gl.weights[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  return gl;
}

double radiation_integral(const SwarmLayout& layout, const ChannelParams& params,
                          const QuadratureSpec& quad, const ElementPattern& pattern) {
  quad.validate();
  const GaussLegendre gl = gauss_legendre(quad.n_theta);
  const double dphi = 2.0 * kPi / quad.n_phi;
  double total = 0.0;
  for (int a = 0; a < quad.n_theta; ++a) {
    const double theta = 0.5 * kPi * (gl.nodes[static_cast<std::size_t>(a)] + 1.0);
    const double wt = 0.5 * kPi * gl.weights[static_cast<std::size_t>(a)] * std::sin(theta);
    double ring = 0.0;
    for (int b = 0; b < quad.n_phi; ++b) {
      const Direction d{theta, -kPi + b * dphi};
      const double om = pattern(d);
      ring += std::norm(array_factor(layout, d, params.wavelength)) * om * om;
    }
    total += wt * ring * dphi;
  }
  return total;
}

double radiation_integral_closed_form(const SwarmLayout& layout, const ChannelParams& params) {
  const double kc = params.phase_constant();
  const std::size_t n = layout.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += layout.weights[i] * layout.weights[i];
    for (std::size_t k = i + 1; k < n; ++k) {
      const double x = kc * distance(layout.positions[i], layout.positions[k]);
      const double sinc = x == 0.0 ? 1.0 : std::sin(x) / x;
      s += 2.0 * layout.weights[i] * layout.weights[k] * sinc;
    }
  }
  return 4.0 * kPi * s;
}

double array_gain(const SwarmLayout& layout, const Direction& target,
                  const ChannelParams& params, const QuadratureSpec& quad,
                  const ElementPattern& pattern) {
  layout.validate();
  if (weight_sum(layout) == 0.0) throw DegenerateArray("array_gain: all excitation weights are zero");
  const double denom = radiation_integral(layout, params, quad, pattern);
  if (!(denom > 0.0)) throw DegenerateArray("array_gain: radiation integral is not positive");
  const double om = pattern(target);
  const double num = 4.0 * kPi * std::norm(array_factor(layout, target, params.wavelength)) * om * om;
  return num / denom * params.antenna_efficiency;
}

double array_gain_closed_form(const SwarmLayout& layout, const Direction& target,
                              const ChannelParams& params) {
  layout.validate();
  if (weight_sum(layout) == 0.0) throw DegenerateArray("array_gain: all excitation weights are zero");
  const double denom = radiation_integral_closed_form(layout, params);
  // sum_ik I_i I_k sinc(.) is a PSD quadratic form; it only vanishes for
  // zero weights, but round-off can push it to 0 for pathological layouts.
  if (!(denom > 0.0)) throw DegenerateArray("array_gain: radiation integral is not positive");
  const double num = 4.0 * kPi * std::norm(array_factor(layout, target, params.wavelength));
  return num / denom * params.antenna_efficiency;
}

double sample_rician(double rician_k, double mean, Rng& rng) {
  const double los = std::sqrt(rician_k / (rician_k + 1.0));
  const double sd = std::sqrt(0.5 / (rician_k + 1.0));
  const double re = los + rng.normal(0.0, sd);
  const double im = rng.normal(0.0, sd);
  return (re * re + im * im) * mean;
}

double channel_gain(double distance, const ChannelParams& params, double fading) {
  if (distance == 0.0) throw ZeroDistance("channel_gain: zero link distance");
  return params.path_loss_constant() * std::pow(distance, -params.alpha) * fading;
}

double sinr(double p_u, double g_uvaa, double g_um, double p_b, double g_bm_ant, double g_bm_ch,
            double noise) {
  return p_u * g_uvaa * g_um / (noise + p_b * g_bm_ant * g_bm_ch);
}

double achievable_rate(double sinr_value) { return std::log2(1.0 + sinr_value); }

Direction direction_to(const Vec3& source, const Vec3& target) {
  const Vec3 d = target - source;
  const double r = d.norm();
  if (r == 0.0) throw CoincidentPoints("direction_to: source and target coincide");
  return {std::acos(std::clamp(d.z / r, -1.0, 1.0)), std::atan2(d.y, d.x)};
}

double uvaa_tx_power(const SwarmLayout& layout, const ChannelParams& params) {
  double s = 0.0;
  for (double w : layout.weights) s += w * w;
  return params.tx_power_per_uav * s;
}

}  // namespace uvaa::physics
