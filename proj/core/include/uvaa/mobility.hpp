#pragma once

#include <utility>

#include "uvaa/rng.hpp"
#include "uvaa/vec3.hpp"

namespace uvaa::mobility {

struct Area {
  double x_min = 0.0;
  double x_max = 100.0;
  double y_min = 0.0;
  double y_max = 100.0;

  bool contains(const Vec2& p) const noexcept {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  Vec2 center() const noexcept { return {0.5 * (x_min + x_max), 0.5 * (y_min + y_max)}; }
};

/// Memory-based Gauss-Markov user: speed and heading are AR(1) processes.
struct GaussMarkovState {
  double speed = 1.0;          // m/s
  double heading = 0.0;        // rad, unwrapped
  double memory = 0.8;         // alpha_g in [0, 1]
  double mean_speed = 1.0;     // m/s
  double mean_heading = 0.0;   // rad
  double sigma_speed = 0.3;    // asymptotic std-dev of the speed process
  double sigma_heading = 0.3;  // asymptotic std-dev of the heading process
  Vec2 position{50.0, 50.0};
  Area area{};

  void validate() const;
  /// Heading reduced to [0, 2 pi).
  double observed_heading() const noexcept;
};

/// One Gauss-Markov update of (speed, heading). Speed is floored at 0.
std::pair<double, double> gm_step(const GaussMarkovState& state, Rng& rng);

/// Advance speed/heading then position by v dt (cos, sin). Walls reflect
/// specularly; a reflection mirrors the current and the mean heading so the
/// memory term does not drive the user back into the wall.
GaussMarkovState user_step(const GaussMarkovState& state, double dt, Rng& rng);

}  // namespace uvaa::mobility
