#include "hevsim/plant.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hevsim {

double soc_derivative(double soc, double p_bat, const BatteryParams& bp) {
  if (p_bat == 0.0) return 0.0;
  const double u = bp.open_circuit_voltage(soc);
  const double r = bp.internal_resistance(soc);
  const double disc = u * u - 4.0 * r * p_bat;
  if (disc < 0.0)
    throw InfeasiblePower("battery cannot deliver " + std::to_string(p_bat) + " W at soc " +
                          std::to_string(soc));
  // Branch-current solution of U_oc*I - R*I^2 = p_bat, taking the root that
  // vanishes with p_bat.
  const double current = (u - std::sqrt(disc)) / (2.0 * r);
  return -current / bp.capacity_coulombs;
}

double battery_power_for_soc_rate(double soc, double soc_rate, const BatteryParams& bp) {
  const double u = bp.open_circuit_voltage(soc);
  const double r = bp.internal_resistance(soc);
  const double current = -soc_rate * bp.capacity_coulombs;
  return u * current - r * current * current;
}

double coolant_derivative(double t_cl, double fuel_rate, double p_eng, double speed,
                          const ThermalParams& tp) {
  const double q_comb = tp.fuel_lhv * fuel_rate * (1.0 - tp.exhaust_fraction);
  const double q_air = (tp.h0 + tp.h1 * speed) * (t_cl - tp.t_amb);
  return (q_comb - p_eng - q_air - tp.q_heat) / tp.thermal_mass;
}

StepResult step(const PlantState& state, const PlantInput& input, double dt,
                const BatteryParams& bp, const ThermalParams& tp) {
  if (!(dt > 0.0)) throw ValidationError("step requires dt > 0");
  StepResult out;
  const double ds = soc_derivative(state.soc, input.p_bat, bp);
  const double dT =
      coolant_derivative(state.t_cl, input.fuel_rate, input.p_eng, input.speed, tp);
  double soc = state.soc + dt * ds;
  if (soc < 0.0 || soc > 1.0) {
    soc = std::clamp(soc, 0.0, 1.0);
    out.soc_saturated = true;
  }
  out.state.soc = soc;
  out.state.t_cl = state.t_cl + dt * dT;
  return out;
}

}  // namespace hevsim
