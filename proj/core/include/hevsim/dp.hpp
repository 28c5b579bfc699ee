#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hevsim/cycle.hpp"
#include "hevsim/split.hpp"

namespace hevsim {

// Backward-induction value above this level counts as "no feasible policy".
constexpr double kDpNoPolicy = 1e6;
// Weight-one dead cells contribute this much to the combined value.
constexpr double kDpDeadSentinel = 1e7;

struct DpGrid {
  std::vector<double> soc_points;      // uniform over the SOC box
  std::vector<double> t_cl_points;     // uniform over the temperature box
  std::vector<double> control_points;  // uniform over the battery power box
  double dt = 1.0;                     // s

  static std::vector<double> linspace(double a, double b, int n);
  static DpGrid defaults(const StateBounds& bounds, const BatteryParams& battery);
};

struct DpParams {
  PlantState initial{0.6, 50.0};
  double terminal_band = 0.01;  // fraction of initial soc
  SplitParams split;
  ThermalParams thermal;
  AlphaCurve alpha;
  StateBounds bounds;
  RoadLoadParams road;
};

// Value tables from the backward sweep. The combined value minimized by the
// recursion is fuel_to_go + kDpDeadSentinel * dead_weight: fuel_to_go carries
// the clean fuel of the surviving plan while dead_weight accumulates the
// interpolation mass that leaked into infeasible terminal cells. Splitting the
// two keeps the fuel prediction finite and meaningful even when a small
// weight has bled in. Cells with no feasible transition store (0, 1).
struct DpPolicy {
  DpGrid grid;
  int n_steps = 0;
  double terminal_band = 0.01;
  double soc_init = 0.6;
  std::vector<double> fuel_to_go;    // (n_steps+1) x nsoc x ntcl, kg
  std::vector<double> dead_weight;   // same shape, [0, 1]
  std::vector<double> best_control;  // n_steps x nsoc x ntcl, W

  int nsoc() const { return static_cast<int>(grid.soc_points.size()); }
  int ntcl() const { return static_cast<int>(grid.t_cl_points.size()); }
  std::size_t idx(int t, int i, int j) const {
    return (static_cast<std::size_t>(t) * nsoc() + i) * ntcl() + j;
  }
  double value(int t, int i, int j) const {
    return fuel_to_go[idx(t, i, j)] + kDpDeadSentinel * dead_weight[idx(t, i, j)];
  }
  // Multilinear interpolation of (fuel, weight) at a continuous state.
  void interp(int t, double soc, double t_cl, double& fuel, double& weight) const;
  double value_interp(int t, double soc, double t_cl) const;
};

// Full-cycle backward sweep. Terminal cost is zero inside the +-band SOC
// window around params.initial.soc and dead outside; infeasible transitions
// (box exit, battery limit) are excluded; ties go to the smaller |p_bat|.
// Throws NoFeasiblePolicy when the initial state's combined value is at least
// kDpNoPolicy.
DpPolicy solve_dp(const DriveCycle& cycle, const DpGrid& grid, const DpParams& params);

struct DpTrajectory {
  std::vector<double> p_bat, p_eng, fuel_rate, soc, t_cl;  // soc/t_cl have n+1 entries
  double total_fuel = 0.0;                                 // kg
};

// Forward greedy rollout: at each step re-optimize one step over the candidate
// controls against the interpolated next-slice value, rejecting landings whose
// dead weight is 0.5 or more. Saturating, never throws.
DpTrajectory rollout_policy(const DpPolicy& policy, const DriveCycle& cycle,
                            const PlantState& initial, const DpParams& params);

// Recompute the backward kernel at sampled stored cells and return the largest
// absolute difference from the stored combined value.
double bellman_residual_audit(const DpPolicy& policy, const DriveCycle& cycle,
                              const DpParams& params, int samples, std::uint64_t seed);

// Binary policy cache. Layout: magic "HEVDPOL1"; int64 n_steps, nsoc, ntcl,
// nctrl; double dt, terminal_band, soc_init; the three axes; then fuel_to_go,
// dead_weight, best_control as little-endian doubles in the index order of
// DpPolicy::idx.
void save_policy(const DpPolicy& policy, const std::string& path);
DpPolicy load_policy(const std::string& path);

}  // namespace hevsim
