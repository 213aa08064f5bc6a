#pragma once

#include "uvaa/vec3.hpp"

namespace uvaa::dynamics {

/// Rotary-wing propulsion constants. Defaults follow the widely used
/// rotary-wing reference set; every field is config-overridable.
struct RotorParams {
  double blade_power = 79.86;            // P_B, W
  double induced_power = 88.63;          // P_I, W
  double tip_speed = 120.0;              // v_tip, m/s
  double hover_induced_velocity = 4.03;  // v_0, m/s
  double fuselage_drag_ratio = 0.6;      // d_0
  double air_density = 1.225;            // rho, kg/m^3
  double rotor_solidity = 0.05;          // s
  double rotor_disc_area = 0.503;        // A, m^2
  double uav_mass = 2.0;                 // kg
  double gravity = 9.8;                  // m/s^2

  void validate() const;
  double hover_power() const noexcept { return blade_power + induced_power; }
};

/// One slot of motion for one UAV.
struct MoveCommand {
  double psi = 0.0;  // horizontal heading, [0, 2 pi]
  double d_h = 0.0;  // horizontal distance, [0, d_h_max]
  double d_v = 0.0;  // signed vertical distance, [-d_v_max, d_v_max]
};

Vec3 step_position(const Vec3& pos, const MoveCommand& cmd);

/// Propulsion power at horizontal speed v.
double propulsion_power(double v, const RotorParams& rotor);

/// Piecewise-constant speed over the slot: |(d_h, d_v)| / dt.
double commanded_speed(const MoveCommand& cmd, double dt);

/// Energy of one slot:
///   P(v_new) dt + m (v_new^2 - v_prev^2) / 2 + m g d_v,  v_new = commanded_speed(cmd, dt).
/// Can be negative on steep descents.
double slot_energy(double v_prev, const MoveCommand& cmd, double dt, const RotorParams& rotor);

}  // namespace uvaa::dynamics
