#pragma once

#include <string>
#include <vector>

#include "hevsim/errors.hpp"
#include "hevsim/linear_table.hpp"

namespace hevsim {

// Optimal-operating-line sample: the speed/torque pair the engine controller
// picks for a given mechanical power.
struct OolPoint {
  double p_eng = 0.0;   // W
  double omega = 0.0;   // rad/s
  double torque = 0.0;  // Nm
};

// Willans-line engine model restricted to its optimal operating line. Fuel is
// affine in mechanical power when the engine is on and exactly zero when off.
struct EngineMap {
  double p_eng_max = 56e3;        // W
  double idle_fuel_rate = 1e-4;   // kg/s at p_eng -> 0+
  double willans_slope = 6e-8;    // kg/J
  std::vector<OolPoint> ool;      // strictly increasing in p_eng, covers [0, p_eng_max]

  static EngineMap defaults();
};

// Cold-penalty multiplier on fuel flow as a function of coolant temperature.
// At or above warm_temp the multiplier is exactly one.
struct AlphaCurve {
  PiecewiseLinear curve{{-20.0, 20.0, 40.0, 50.0, 60.0, 70.0},
                        {1.45, 1.32, 1.22, 1.08, 1.02, 1.0}};
  double warm_temp = 70.0;  // degC

  double operator()(double t_cl) const { return t_cl >= warm_temp ? 1.0 : curve(t_cl); }
};

// Longitudinal road-load model parameters.
struct RoadLoadParams {
  double mass = 1530.0;          // kg
  double rolling_coeff = 0.009;  //
  double drag_area = 0.58;       // m^2, Cd * A
  double air_density = 1.2;      // kg/m^3
  double driveline_eff = 0.95;   //
  double regen_cap = 25e3;       // W, most braking power recoverable at the bus
};

// Fuel flow for a warm engine. Zero exactly at p_eng = 0; throws
// PowerOutOfRange outside [0, p_eng_max].
double nominal_fuel_rate(double p_eng, const EngineMap& em);

// Fuel flow including the cold penalty.
double corrected_fuel_rate(double p_eng, double t_cl, const EngineMap& em,
                           const AlphaCurve& alpha);

// Speed/torque on the optimal operating line at a given power, interpolated
// between table rows. Throws PowerOutOfRange outside [0, p_eng_max].
OolPoint ool_point(double p_eng, const EngineMap& em);

// Power the drivetrain must put on the bus to follow (speed, accel). Positive
// demands are divided by the driveline efficiency; braking power is multiplied
// by it and clipped at -regen_cap. Exactly zero at standstill.
double power_demand(double speed, double accel, const RoadLoadParams& rl);

// Whitespace-separated numeric table with '#' comments. Every data row must
// have the same column count. Throws ParseError / ValidationError.
std::vector<std::vector<double>> load_table(const std::string& path);

// Build an AlphaCurve from a two-column (t_cl, multiplier) table file. The
// warm threshold is the first breakpoint whose multiplier equals one.
AlphaCurve alpha_from_file(const std::string& path);

// Build the OOL table of an EngineMap from a three-column (p_eng, omega,
// torque) file; other EngineMap fields keep their current values.
void ool_from_file(const std::string& path, EngineMap& em);

}  // namespace hevsim
