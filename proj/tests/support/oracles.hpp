#pragma once

// Independent reference implementations used to check the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "uvaa/rng.hpp"

namespace oracle {

// Componentwise advantage by the literal double sum
//   A[t] = sum_{k >= 0} (gamma lambda)^k delta[t + k]
// over one episode laid out as columns t * B + b.
inline Eigen::MatrixXd gae_double_loop(const Eigen::MatrixXd& r, const Eigen::MatrixXd& v, int B,
                                       double gamma, double lambda) {
  const Eigen::Index T = r.cols() / B;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(r.rows(), r.cols());
  for (Eigen::Index m = 0; m < r.rows(); ++m)
    for (int b = 0; b < B; ++b)
      for (Eigen::Index t = 0; t < T; ++t) {
        double sum = 0.0;
        for (Eigen::Index k = 0; t + k < T; ++k) {
          const Eigen::Index c = (t + k) * B + b;
          const double next = t + k + 1 < T ? v(m, c + B) : 0.0;
          const double delta = r(m, c) + gamma * next - v(m, c);
          sum += std::pow(gamma * lambda, static_cast<double>(k)) * delta;
        }
        out(m, t * B + b) = sum;
      }
  return out;
}

using P2 = std::array<double, 2>;

inline double igd_brute(const std::vector<P2>& front, const std::vector<P2>& ref) {
  double total = 0.0;
  for (const auto& r : ref) {
    double best = 1e300;
    for (const auto& p : front) {
      const double dx = p[0] - r[0], dy = p[1] - r[1];
      best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
    total += best;
  }
  return total / static_cast<double>(ref.size());
}

struct McEstimate {
  double value;
  double sigma;
};

// Hit-or-miss estimate of the dominated area inside [ref, hi].
inline McEstimate hv_monte_carlo(const std::vector<P2>& front, const P2& ref, const P2& hi, int samples,
                                 uvaa::Rng& rng) {
  long hits = 0;
  for (int s = 0; s < samples; ++s) {
    const double x = rng.uniform(ref[0], hi[0]);
    const double y = rng.uniform(ref[1], hi[1]);
    for (const auto& p : front)
      if (p[0] >= x && p[1] >= y) {
        ++hits;
        break;
      }
  }
  const double box = (hi[0] - ref[0]) * (hi[1] - ref[1]);
  const double q = static_cast<double>(hits) / samples;
  return {box * q, box * std::sqrt(q * (1.0 - q) / samples)};
}

// Asymptotic Kolmogorov distribution tail, Q_KS(lambda).
inline double kolmogorov_q(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0, sign = 1.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-12) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// One-sample KS test p-value of `xs` against `cdf`.
template <class Cdf>
double ks_p_value(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  const double sn = std::sqrt(n);
  return kolmogorov_q((sn + 0.12 + 0.11 / sn) * d);
}

inline double autocorrelation(const std::vector<double>& x, int lag) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += (x[i] - mean) * (x[i] - mean);
    if (i + lag < x.size()) num += (x[i] - mean) * (x[i + lag] - mean);
  }
  return num / den;
}

}  // namespace oracle
