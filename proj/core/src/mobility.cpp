#include "uvaa/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace uvaa::mobility {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double ar1(double prev, double mean, double memory, double sigma, Rng& rng) {
  double next = memory * prev + (1.0 - memory) * mean;
  const double innovation = std::sqrt(std::max(0.0, 1.0 - memory * memory)) * sigma;
  if (innovation > 0.0) next += rng.normal(0.0, innovation);
  return next;
}

// Reflect a coordinate into [lo, hi]; returns true when an odd number of
// reflections happened (direction flipped).
bool reflect(double& v, double lo, double hi) {
  const double width = hi - lo;
  if (width <= 0.0) {
    v = lo;
    return false;
  }
  bool flipped = false;
  while (v < lo || v > hi) {
    if (v > hi) v = 2.0 * hi - v;
    else v = 2.0 * lo - v;
    flipped = !flipped;
  }
  return flipped;
}

}  // namespace

void GaussMarkovState::validate() const {
  if (!(memory >= 0.0 && memory <= 1.0))
    throw std::invalid_argument("GaussMarkovState: memory must be in [0,1]");
  if (!(sigma_speed >= 0.0) || !(sigma_heading >= 0.0))
    throw std::invalid_argument("GaussMarkovState: sigma must be >= 0");
  if (!(speed >= 0.0)) throw std::invalid_argument("GaussMarkovState: speed must be >= 0");
  if (!(area.x_min < area.x_max) || !(area.y_min < area.y_max))
    throw std::invalid_argument("GaussMarkovState: empty area");
  if (!area.contains(position))
    throw std::invalid_argument("GaussMarkovState: position outside area");
}

double GaussMarkovState::observed_heading() const noexcept {
  double h = std::fmod(heading, kTwoPi);
  if (h < 0.0) h += kTwoPi;
  return h;
}

std::pair<double, double> gm_step(const GaussMarkovState& s, Rng& rng) {
  const double v = ar1(s.speed, s.mean_speed, s.memory, s.sigma_speed, rng);
  const double h = ar1(s.heading, s.mean_heading, s.memory, s.sigma_heading, rng);
  return {std::max(0.0, v), h};
}

GaussMarkovState user_step(const GaussMarkovState& state, double dt, Rng& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("user_step: dt must be > 0");
  GaussMarkovState next = state;
  const auto [v, h] = gm_step(state, rng);
  next.speed = v;
  next.heading = h;
  Vec2 p{state.position.x + v * dt * std::cos(h), state.position.y + v * dt * std::sin(h)};
  if (reflect(p.x, state.area.x_min, state.area.x_max)) {
    next.heading = std::numbers::pi - next.heading;
    next.mean_heading = std::numbers::pi - next.mean_heading;
  }
  if (reflect(p.y, state.area.y_min, state.area.y_max)) {
    next.heading = -next.heading;
    next.mean_heading = -next.mean_heading;
  }
  next.position = p;
  return next;
}

}  // namespace uvaa::mobility
