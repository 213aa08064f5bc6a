#include "uvaa/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "uvaa/error.hpp"

namespace uvaa::env {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kMaxPlacementRounds = 10000;
constexpr double kBoundSlack = 1e-9;
// Links shorter than the 1 m reference distance of K0 are evaluated at 1 m.
constexpr double kMinLinkDistance = 1.0;

bool in_box(const EnvConfig& c, const Vec3& p) {
  return p.x >= c.l_min && p.x <= c.l_max && p.y >= c.l_min && p.y <= c.l_max &&
         p.z >= c.h_min && p.z <= c.h_max;
}

void check_action(const EnvConfig& c, const ActionVector& a) {
  if (a.size() != static_cast<std::size_t>(c.n_uav))
    throw std::invalid_argument("step: action has " + std::to_string(a.size()) +
                                " UAV entries, expected " + std::to_string(c.n_uav));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& u = a[i];
    const bool ok = u.weight >= -kBoundSlack && u.weight <= 1.0 + kBoundSlack &&
                    u.psi >= -kBoundSlack && u.psi <= kTwoPi + kBoundSlack &&
                    u.d_h >= -kBoundSlack && u.d_h <= c.d_h_max + kBoundSlack &&
                    std::abs(u.d_v) <= c.d_v_max + kBoundSlack;
    if (!ok) throw std::invalid_argument("step: action out of bounds for UAV " + std::to_string(i));
  }
}

}  // namespace

void EnvConfig::validate() const {
  if (n_uav < 1) throw std::invalid_argument("EnvConfig: n_uav must be >= 1");
  if (horizon < 1) throw std::invalid_argument("EnvConfig: horizon must be >= 1");
  if (!(slot_duration > 0.0)) throw std::invalid_argument("EnvConfig: slot_duration must be > 0");
  if (!(l_min < l_max)) throw std::invalid_argument("EnvConfig: l_min must be < l_max");
  if (!(h_min < h_max)) throw std::invalid_argument("EnvConfig: h_min must be < h_max");
  if (!(d_min > 0.0)) throw std::invalid_argument("EnvConfig: d_min must be > 0");
  if (!(d_h_max >= 0.0) || !(d_v_max >= 0.0))
    throw std::invalid_argument("EnvConfig: d_h_max and d_v_max must be >= 0");
  if (!(eps1 >= 0.0 && eps2 >= 0.0 && eps3 >= 0.0))
    throw std::invalid_argument("EnvConfig: penalty coefficients must be >= 0");
  channel.validate();
  rotor.validate();
  quadrature.validate();
  mobility::GaussMarkovState probe;
  probe.memory = mobility.memory;
  probe.sigma_speed = mobility.sigma_speed;
  probe.sigma_heading = mobility.sigma_heading;
  probe.area = mobility.area;
  probe.position = mobility.area.center();
  probe.speed = std::max(0.0, mobility.mean_speed);
  probe.validate();
}

ActionVector unflatten_action(std::span<const double> flat) {
  if (flat.size() % 4 != 0) throw std::invalid_argument("unflatten_action: size not a multiple of 4");
  ActionVector a(flat.size() / 4);
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i] = {flat[4 * i], flat[4 * i + 1], flat[4 * i + 2], flat[4 * i + 3]};
  return a;
}

std::vector<double> flatten_action(const ActionVector& action) {
  std::vector<double> flat;
  flat.reserve(4 * action.size());
  for (const auto& u : action) flat.insert(flat.end(), {u.weight, u.psi, u.d_h, u.d_v});
  return flat;
}

std::vector<double> action_low(const EnvConfig& c) {
  std::vector<double> lo;
  for (int i = 0; i < c.n_uav; ++i) lo.insert(lo.end(), {0.0, 0.0, 0.0, -c.d_v_max});
  return lo;
}

std::vector<double> action_high(const EnvConfig& c) {
  std::vector<double> hi;
  for (int i = 0; i < c.n_uav; ++i) hi.insert(hi.end(), {1.0, kTwoPi, c.d_h_max, c.d_v_max});
  return hi;
}

EnvState reset(const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(derive_seed(seed, "env-placement"));
  EnvState s;
  const auto n = static_cast<std::size_t>(config.n_uav);
  s.layout.positions.reserve(n);
  int rounds = 0;
  while (s.layout.positions.size() < n) {
    const Vec3 p{rng.uniform(config.l_min, config.l_max), rng.uniform(config.l_min, config.l_max),
                 rng.uniform(config.h_min, config.h_max)};
    const bool clear = std::all_of(s.layout.positions.begin(), s.layout.positions.end(),
                                   [&](const Vec3& q) { return distance(p, q) >= config.d_min; });
    if (clear) {
      s.layout.positions.push_back(p);
    } else if (++rounds >= kMaxPlacementRounds) {
      throw PlacementFailure("reset: could not place " + std::to_string(n) + " UAVs with d_min " +
                             std::to_string(config.d_min) + " after " +
                             std::to_string(kMaxPlacementRounds) + " rejections");
    }
  }
  s.layout.weights.assign(n, 1.0);
  s.prev_speeds.assign(n, 0.0);
  const auto& m = config.mobility;
  s.user.memory = m.memory;
  s.user.mean_speed = m.mean_speed;
  s.user.mean_heading = m.mean_heading;
  s.user.sigma_speed = m.sigma_speed;
  s.user.sigma_heading = m.sigma_heading;
  s.user.area = m.area;
  s.user.position = m.area.center();
  s.user.speed = std::max(0.0, m.mean_speed);
  s.user.heading = m.mean_heading;
  s.slot_index = 0;
  return s;
}

StepResult step(const EnvConfig& config, const EnvState& state, const ActionVector& action,
                Rng& rng) {
  if (state.slot_index >= config.horizon) throw EpisodeFinished("step: episode already finished");
  check_action(config, action);
  const std::size_t n = state.layout.size();

  // (1) tentative motion, (2) freeze offenders until the configuration is feasible
  std::vector<Vec3> tentative(n);
  std::vector<bool> frozen(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const dynamics::MoveCommand cmd{action[i].psi, action[i].d_h, action[i].d_v};
    tentative[i] = dynamics::step_position(state.layout.positions[i], cmd);
    frozen[i] = !in_box(config, tentative[i]);
  }
  auto where = [&](std::size_t i) { return frozen[i] ? state.layout.positions[i] : tentative[i]; };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = i + 1; k < n; ++k) {
        if (distance(where(i), where(k)) >= config.d_min) continue;
        for (std::size_t j : {i, k}) {
          if (!frozen[j]) {
            frozen[j] = true;
            changed = true;
          }
        }
      }
    }
  }
  const bool valid = std::none_of(frozen.begin(), frozen.end(), [](bool f) { return f; });

  StepResult out;
  out.state = state;
  out.frozen = frozen;
  auto& next = out.state;
  for (std::size_t i = 0; i < n; ++i) {
    next.layout.positions[i] = where(i);
    next.layout.weights[i] = std::clamp(action[i].weight, 0.0, 1.0);
  }

  // (3) user motion, then fresh block fading
  next.user = mobility::user_step(state.user, config.slot_duration, rng);
  const auto& ch = config.channel;
  const double fading_um = physics::sample_rician(ch.rician_k, 1.0, rng);
  const double fading_bm = physics::sample_rician(ch.rician_k, 1.0, rng);

  // (4) rate toward the user from the swarm centroid
  const Vec3 user{next.user.position.x, next.user.position.y, 0.0};
  const Vec3 centroid = next.layout.centroid();
  double weight_total = 0.0;
  for (double w : next.layout.weights) weight_total += w;
  if (weight_total > 0.0) {
    const physics::Direction dir = physics::direction_to(centroid, user);
    out.gain = config.gain_integration == physics::GainIntegration::ClosedForm
                   ? physics::array_gain_closed_form(next.layout, dir, ch)
                   : physics::array_gain(next.layout, dir, ch, config.quadrature);
    const double g_um =
        physics::channel_gain(std::max(kMinLinkDistance, distance(centroid, user)), ch, fading_um);
    const Vec3 bs{config.bs_position.x, config.bs_position.y, 0.0};
    const double g_bm =
        physics::channel_gain(std::max(kMinLinkDistance, distance(bs, user)), ch, fading_bm);
    out.sinr = physics::sinr(physics::uvaa_tx_power(next.layout, ch), out.gain, g_um,
                             ch.bs_tx_power, ch.bs_sidelobe_gain, g_bm, ch.noise_power);
    out.rate = physics::achievable_rate(out.sinr);
  }

  // (5) energy; frozen UAVs hover for the slot
  double energy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dynamics::MoveCommand cmd{action[i].psi, action[i].d_h, action[i].d_v};
    if (frozen[i]) cmd.d_h = cmd.d_v = 0.0;
    double e = dynamics::slot_energy(state.prev_speeds[i], cmd, config.slot_duration, config.rotor);
    if (config.clamp_negative_energy) e = std::max(0.0, e);
    energy += e;
    next.prev_speeds[i] = dynamics::commanded_speed(cmd, config.slot_duration);
  }
  out.energy = energy;

  // (6) vector reward
  out.valid = valid;
  out.reward = valid ? RewardVector{out.rate, -config.eps1 * energy}
                     : RewardVector{config.eps2 * out.rate, -config.eps1 * config.eps3 * energy};
  next.slot_index = state.slot_index + 1;
  return out;
}

std::vector<double> observe(const EnvConfig& config, const EnvState& state) {
  std::vector<double> obs;
  obs.reserve(config.observation_size());
  const double hspan = config.h_max - config.h_min;
  for (const auto& p : state.layout.positions)
    obs.insert(obs.end(), {p.x / config.l_max, p.y / config.l_max, (p.z - config.h_min) / hspan});
  obs.insert(obs.end(),
             {state.user.position.x / config.l_max, state.user.position.y / config.l_max, 0.0});
  return obs;
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) { config_.validate(); }

const EnvState& Environment::reset(std::uint64_t seed) {
  state_ = env::reset(config_, seed);
  rng_ = Rng(derive_seed(seed, "env-dynamics"));
  return state_;
}

StepResult Environment::step(const ActionVector& action) {
  StepResult r = env::step(config_, state_, action, rng_);
  state_ = r.state;
  return r;
}

}  // namespace uvaa::env
