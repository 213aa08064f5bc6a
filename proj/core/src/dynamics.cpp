#include "uvaa/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace uvaa::dynamics {

void RotorParams::validate() const {
  const double fields[] = {blade_power,         induced_power,  tip_speed,
                           hover_induced_velocity, fuselage_drag_ratio, air_density,
                           rotor_solidity,      rotor_disc_area, uav_mass,
                           gravity};
  for (double f : fields)
    if (!(f > 0.0) || !std::isfinite(f))
      throw std::invalid_argument("RotorParams: every constant must be finite and > 0");
}

Vec3 step_position(const Vec3& pos, const MoveCommand& cmd) {
  return {pos.x + cmd.d_h * std::cos(cmd.psi), pos.y + cmd.d_h * std::sin(cmd.psi),
          pos.z + cmd.d_v};
}

double propulsion_power(double v, const RotorParams& r) {
  const double v2 = v * v;
  const double v02 = r.hover_induced_velocity * r.hover_induced_velocity;
  const double blade = r.blade_power * (1.0 + 3.0 * v2 / (r.tip_speed * r.tip_speed));
  // sqrt(1 + v^4/(4 v0^4)) - v^2/(2 v0^2) is positive but loses digits for
  // large v; the conjugate form keeps it accurate.
  const double q = v2 / (2.0 * v02);
  const double induced_term = 1.0 / (std::sqrt(1.0 + q * q) + q);
  const double induced = r.induced_power * std::sqrt(induced_term);
  const double parasite =
      0.5 * r.fuselage_drag_ratio * r.air_density * r.rotor_solidity * r.rotor_disc_area * v2 * v;
  return blade + induced + parasite;
}

double commanded_speed(const MoveCommand& cmd, double dt) {
  return std::hypot(cmd.d_h, cmd.d_v) / dt;
}

double slot_energy(double v_prev, const MoveCommand& cmd, double dt, const RotorParams& rotor) {
  if (!(dt > 0.0)) throw std::invalid_argument("slot_energy: dt must be > 0");
  const double v_new = commanded_speed(cmd, dt);
  return propulsion_power(v_new, rotor) * dt +
         0.5 * rotor.uav_mass * (v_new * v_new - v_prev * v_prev) +
         rotor.uav_mass * rotor.gravity * cmd.d_v;
}

}  // namespace uvaa::dynamics
