#pragma once

#include <complex>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

#include "uvaa/rng.hpp"
#include "uvaa/vec3.hpp"

namespace uvaa::physics {

/// Positions and excitation current weights of the swarm at one slot.
struct SwarmLayout {
  std::vector<Vec3> positions;  // meters
  std::vector<double> weights;  // in [0, 1]

  std::size_t size() const noexcept { return positions.size(); }
  /// Throws std::invalid_argument when sizes differ, N == 0, a weight is outside
  /// [0, 1] or a coordinate is non-finite.
  void validate() const;
  Vec3 centroid() const;
};

/// Spherical direction in the global frame. theta is measured from +z.
struct Direction {
  double theta = 0.0;  // [0, pi]
  double phi = 0.0;    // [-pi, pi]
};

struct ChannelParams {
  double k0 = 0.0;                // path-loss constant; 0 selects (lambda / 4 pi)^2
  double alpha = 2.0;             // path-loss exponent
  double rician_k = 10.0;         // K for both the UVAA and BS links
  double noise_power = 3.1622776601683794e-13;  // W, -155 dBm/Hz over 1 MHz
  double wavelength = 299792458.0 / 2.4e9;      // m
  double antenna_efficiency = 1.0;
  double bs_sidelobe_gain = 0.1;
  double tx_power_per_uav = 0.1;  // W
  double bs_tx_power = 1.0;       // W

  double phase_constant() const noexcept { return 2.0 * std::numbers::pi / wavelength; }
  double path_loss_constant() const noexcept {
    if (k0 > 0.0) return k0;
    const double r = wavelength / (4.0 * std::numbers::pi);
    return r * r;
  }
  void validate() const;
};

struct QuadratureSpec {
  int n_theta = 64;
  int n_phi = 128;
  void validate() const;
};

/// How the normalizing integral of the gain is evaluated.
enum class GainIntegration {
  Quadrature,  // Gauss-Legendre in theta x trapezoid in phi
  ClosedForm,  // exact for isotropic elements: 4 pi sum_ik I_i I_k sinc(k_c d_ik)
};

using ElementPattern = std::function<double(const Direction&)>;

/// Isotropic element: omega(theta, phi) = 1.
double element_pattern(const Direction& dir);

std::complex<double> array_factor(const SwarmLayout& layout, const Direction& dir,
                                  double wavelength);

/// Directivity-style gain of the array toward `target`, scaled by the antenna
/// efficiency. The denominator is integrated numerically over the sphere.
/// Throws DegenerateArray when every weight is zero.
double array_gain(const SwarmLayout& layout, const Direction& target,
                  const ChannelParams& params, const QuadratureSpec& quad,
                  const ElementPattern& pattern = element_pattern);

/// Same quantity for isotropic elements with the exact sinc-sum denominator.
double array_gain_closed_form(const SwarmLayout& layout, const Direction& target,
                              const ChannelParams& params);

/// Sphere integral of |AF|^2 omega^2 sin(theta) on the quadrature grid.
double radiation_integral(const SwarmLayout& layout, const ChannelParams& params,
                          const QuadratureSpec& quad,
                          const ElementPattern& pattern = element_pattern);

/// Exact sphere integral of |AF|^2 for isotropic elements.
double radiation_integral_closed_form(const SwarmLayout& layout, const ChannelParams& params);

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on P_n).
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussLegendre gauss_legendre(int n);

/// Rician power sample with E[Omega] = mean.
double sample_rician(double rician_k, double mean, Rng& rng);

/// K0 d^-alpha Omega. Throws ZeroDistance for d == 0.
double channel_gain(double distance, const ChannelParams& params, double fading);

double sinr(double p_u, double g_uvaa, double g_um, double p_b, double g_bm_ant,
            double g_bm_ch, double noise);

/// log2(1 + sinr).
double achievable_rate(double sinr_value);

/// Direction of the vector from `source` to `target`. Throws CoincidentPoints.
Direction direction_to(const Vec3& source, const Vec3& target);

/// Total radiated power of the array: tx_power_per_uav * sum I_i^2.
double uvaa_tx_power(const SwarmLayout& layout, const ChannelParams& params);

}  // namespace uvaa::physics
