#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "uvaa/dynamics.hpp"
#include "uvaa/mobility.hpp"
#include "uvaa/physics.hpp"
#include "uvaa/rng.hpp"

namespace uvaa::env {

struct MobilityParams {
  mobility::Area area{};
  double memory = 0.8;
  double mean_speed = 1.0;
  double mean_heading = 0.0;
  double sigma_speed = 0.3;
  double sigma_heading = 0.3;
};

struct EnvConfig {
  int n_uav = 8;
  int horizon = 300;
  double slot_duration = 1.0;  // s
  double l_min = 0.0;
  double l_max = 100.0;
  double h_min = 60.0;
  double h_max = 90.0;
  double d_h_max = 20.0;
  double d_v_max = 10.0;
  double d_min = 0.5;
  Vec2 bs_position{100.0, 100.0};
  double eps1 = 1e-3;  // energy scale
  double eps2 = 0.5;   // rate factor on invalid slots
  double eps3 = 2.0;   // energy factor on invalid slots
  physics::ChannelParams channel{};
  dynamics::RotorParams rotor{};
  MobilityParams mobility{};
  physics::GainIntegration gain_integration = physics::GainIntegration::ClosedForm;
  physics::QuadratureSpec quadrature{};
  bool clamp_negative_energy = false;

  void validate() const;
  std::size_t observation_size() const noexcept { return 3 * static_cast<std::size_t>(n_uav) + 3; }
  std::size_t action_size() const noexcept { return 4 * static_cast<std::size_t>(n_uav); }
};

struct EnvState {
  physics::SwarmLayout layout;
  std::vector<double> prev_speeds;
  mobility::GaussMarkovState user;
  int slot_index = 0;
};

/// Per-UAV decision for one slot.
struct UavAction {
  double weight = 0.0;  // I_i in [0, 1]
  double psi = 0.0;     // [0, 2 pi]
  double d_h = 0.0;     // [0, d_h_max]
  double d_v = 0.0;     // [-d_v_max, d_v_max]
};
using ActionVector = std::vector<UavAction>;

/// Flat layout used by the policy: (I, psi, d_h, d_v) per UAV, UAV-major.
ActionVector unflatten_action(std::span<const double> flat);
std::vector<double> flatten_action(const ActionVector& action);
/// Lower/upper bounds of the flat action.
std::vector<double> action_low(const EnvConfig& config);
std::vector<double> action_high(const EnvConfig& config);

struct RewardVector {
  double rate = 0.0;    // r^R
  double energy = 0.0;  // r^E
};

struct StepResult {
  EnvState state;
  RewardVector reward;
  bool valid = true;
  double rate = 0.0;    // R_UM, bit/s/Hz
  double energy = 0.0;  // sum_i E_i, J
  double gain = 0.0;    // G_UM
  double sinr = 0.0;
  std::vector<bool> frozen;
};

/// Uniform placement with pairwise rejection. Throws PlacementFailure after
/// 10^4 rejected draws.
EnvState reset(const EnvConfig& config, std::uint64_t seed);

/// Advance one slot. Throws EpisodeFinished when slot_index == horizon and
/// std::invalid_argument for an out-of-bounds action.
StepResult step(const EnvConfig& config, const EnvState& state, const ActionVector& action,
                Rng& rng);

/// Normalized observation, length 3N + 3.
std::vector<double> observe(const EnvConfig& config, const EnvState& state);

/// Stateful wrapper owning the configuration, the state and the slot RNG.
class Environment {
 public:
  explicit Environment(EnvConfig config);

  const EnvState& reset(std::uint64_t seed);
  StepResult step(const ActionVector& action);
  std::vector<double> observe() const { return env::observe(config_, state_); }

  const EnvState& state() const noexcept { return state_; }
  const EnvConfig& config() const noexcept { return config_; }
  bool done() const noexcept { return state_.slot_index >= config_.horizon; }

 private:
  EnvConfig config_;
  EnvState state_;
  Rng rng_;
};

}  // namespace uvaa::env
