#pragma once

#include "hevsim/errors.hpp"
#include "hevsim/linear_table.hpp"

namespace hevsim {

// Equivalent-circuit battery. Open-circuit voltage and internal resistance are
// tables over SOC; the defaults are flat, matching a pack whose parameters vary
// little over the operating window.
struct BatteryParams {
  double capacity_coulombs = 6.5 * 3600.0;
  PiecewiseLinear open_circuit_voltage = PiecewiseLinear::constant(201.6);  // V
  PiecewiseLinear internal_resistance = PiecewiseLinear::constant(0.373);   // ohm
  double p_bat_min = -32e3;  // W, charging limit (negative = charge)
  double p_bat_max = 25e3;   // W, discharge limit

  // Largest terminal power the circuit can source at a given SOC before the
  // discriminant goes negative, shaved slightly so callers can use it as an
  // inclusive bound.
  double feasible_power_cap(double soc) const {
    const double u = open_circuit_voltage(soc);
    const double r = internal_resistance(soc);
    return 0.999 * u * u / (4.0 * r);
  }
};

// Lumped coolant thermal mass plus the fuel-energy split that feeds it.
struct ThermalParams {
  double thermal_mass = 150e3;      // J/K, coolant + engine metal
  double fuel_lhv = 44e6;           // J/kg
  double exhaust_fraction = 0.28;   // share of fuel energy leaving via exhaust
  double h0 = 30.0;                 // W/K, convective loss at standstill
  double h1 = 4.0;                  // W/K per m/s, ram-air term
  double t_amb = -7.0;              // degC
  double q_heat = 1500.0;           // W, constant cabin heating draw
};

// Operating box enforced by the optimizing controllers and the DP solver.
struct StateBounds {
  double soc_min = 0.4;
  double soc_max = 0.8;
  double t_cl_min = 40.0;
  double t_cl_max = 90.0;
};

struct PlantState {
  double soc = 0.6;    // fraction of capacity
  double t_cl = 50.0;  // degC
};

struct PlantInput {
  double p_bat = 0.0;      // W at battery terminals, discharge positive
  double p_eng = 0.0;      // W mechanical from the engine
  double fuel_rate = 0.0;  // kg/s
  double speed = 0.0;      // m/s, for the convective loss
};

struct StepResult {
  PlantState state;
  bool soc_saturated = false;  // clamped at 0 or 1 during this step
};

// d(SOC)/dt for a terminal power draw. Exactly zero at p_bat = 0; throws
// InfeasiblePower when the request exceeds what the circuit can deliver.
double soc_derivative(double soc, double p_bat, const BatteryParams& bp);

// Terminal power that produces a given SOC rate. Inverse of soc_derivative
// under the flat-table assumption at the queried SOC.
double battery_power_for_soc_rate(double soc, double soc_rate, const BatteryParams& bp);

// d(T_cl)/dt from the coolant energy balance.
double coolant_derivative(double t_cl, double fuel_rate, double p_eng, double speed,
                          const ThermalParams& tp);

// One forward-Euler step of both states. SOC is clamped to [0, 1] and the
// clamp is reported; the coolant temperature is not clamped here.
StepResult step(const PlantState& state, const PlantInput& input, double dt,
                const BatteryParams& bp, const ThermalParams& tp);

}  // namespace hevsim
