#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "uvaa/dynamics.hpp"
#include "uvaa/rng.hpp"

using namespace uvaa;
using namespace uvaa::dynamics;
using std::numbers::pi;

namespace {

// straight transcription of the rotary-wing power model, no rearrangement
double power_reference(double v, const RotorParams& r) {
  const double a = r.blade_power * (1 + 3 * v * v / (r.tip_speed * r.tip_speed));
  const double v0 = r.hover_induced_velocity;
  const double inner = std::sqrt(1 + std::pow(v, 4) / (4 * std::pow(v0, 4))) - v * v / (2 * v0 * v0);
  const double b = r.induced_power * std::sqrt(inner);
  const double c = 0.5 * r.fuselage_drag_ratio * r.air_density * r.rotor_solidity * r.rotor_disc_area *
                   std::pow(v, 3);
  return a + b + c;
}

}  // namespace

TEST(StepPosition, Examples) {
  Vec3 p = step_position({0, 0, 70}, {0.0, 5.0, 0.0});
  EXPECT_NEAR(p.x, 5.0, 1e-12);
  EXPECT_NEAR(p.y, 0.0, 1e-12);
  EXPECT_NEAR(p.z, 70.0, 1e-12);
  p = step_position({0, 0, 70}, {pi / 2, 5.0, -3.0});
  EXPECT_NEAR(p.x, 0.0, 1e-12);
  EXPECT_NEAR(p.y, 5.0, 1e-12);
  EXPECT_NEAR(p.z, 67.0, 1e-12);
  p = step_position({3, 4, 65}, {1.0, 0.0, 0.0});
  EXPECT_EQ(p.x, 3.0);
  EXPECT_EQ(p.y, 4.0);
  EXPECT_EQ(p.z, 65.0);
}

TEST(PropulsionPower, HoverIsBladePlusInduced) {
  RotorParams r;
  EXPECT_EQ(propulsion_power(0.0, r), r.blade_power + r.induced_power);
  EXPECT_EQ(r.hover_power(), r.blade_power + r.induced_power);
}

TEST(PropulsionPower, ParasiteDominatesAtHighSpeed) {
  RotorParams r;
  const double v = 100.0;
  const double parasite =
      0.5 * r.fuselage_drag_ratio * r.air_density * r.rotor_solidity * r.rotor_disc_area * v * v * v;
  EXPECT_NEAR(propulsion_power(v, r) / parasite, 1.0, 0.1);
}

TEST(PropulsionPower, MatchesIndependentFormula) {
  RotorParams r;
  for (double v : {r.hover_induced_velocity, 0.5, 1.0, 7.3, 15.0, 25.0})
    EXPECT_NEAR(propulsion_power(v, r) / power_reference(v, r), 1.0, 1e-12) << v;
}

TEST(PropulsionPower, PositiveEverywhere) {
  RotorParams r;
  for (double v = 0.0; v < 300.0; v += 0.25) EXPECT_GT(propulsion_power(v, r), 0.0);
}

TEST(SlotEnergy, HoverSlot) {
  RotorParams r;
  EXPECT_EQ(slot_energy(0.0, {}, 1.0, r), r.blade_power + r.induced_power);
}

TEST(SlotEnergy, ClimbAtConstantSpeed) {
  RotorParams r;
  const MoveCommand cmd{0.0, 0.0, 10.0};
  const double expected = power_reference(10.0, r) + r.uav_mass * r.gravity * 10.0;
  EXPECT_NEAR(slot_energy(10.0, cmd, 1.0, r), expected, 1e-9);
}

TEST(SlotEnergy, DescentThenClimbCancelsPotential) {
  RotorParams r;
  const double h = 7.0;
  const double down = slot_energy(0.0, {0.0, 0.0, -h}, 1.0, r);
  const double up = slot_energy(h, {0.0, 0.0, h}, 1.0, r);
  const double kinetic = 0.5 * r.uav_mass * (h * h - 0.0);
  EXPECT_NEAR(down + up, 2 * propulsion_power(h, r) + kinetic, 1e-9);
}

TEST(SlotEnergy, TelescopesOverClosedAltitudeTrajectory) {
  RotorParams r;
  Rng rng(4);
  std::vector<MoveCommand> cmds;
  double sum_dv = 0.0;
  for (int t = 0; t < 49; ++t) {
    cmds.push_back({rng.uniform(0, 2 * pi), rng.uniform(0, 20), rng.uniform(-10, 10)});
    sum_dv += cmds.back().d_v;
  }
  cmds.push_back({0.0, 3.0, -sum_dv});
  double total = 0.0, power = 0.0, v_prev = 0.0;
  for (const auto& c : cmds) {
    total += slot_energy(v_prev, c, 1.0, r);
    v_prev = commanded_speed(c, 1.0);
    power += propulsion_power(v_prev, r);
  }
  const double kinetic = 0.5 * r.uav_mass * v_prev * v_prev;
  EXPECT_NEAR(total - power - kinetic, 0.0, 1e-9);
}

TEST(SlotEnergy, RejectsNonPositiveSlot) {
  EXPECT_THROW(slot_energy(0.0, {}, 0.0, {}), std::invalid_argument);
}

TEST(RotorParams, Validation) {
  RotorParams r;
  EXPECT_NO_THROW(r.validate());
  r.uav_mass = 0.0;
  EXPECT_THROW(r.validate(), std::invalid_argument);
}
