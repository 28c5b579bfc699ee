#pragma once

#include <optional>
#include <vector>

#include "hevsim/cycle.hpp"
#include "hevsim/nlp.hpp"

namespace hevsim {

// Load-leveling thresholds. charge_power is the engine excess routed into the
// battery while charging.
struct RuleBasedConfig {
  double engine_on_power = 8e3;  // W demand threshold
  double soc_low = 0.55;
  double soc_high = 0.65;
  double t_cl_floor = 50.0;  // degC
  double charge_power = 5e3;  // W
};

// Hysteretic rule-based controller. Engine turns on for heat (t_cl below the
// floor), for charge (soc below the band), or for high demand; otherwise the
// battery serves the load (EV mode, p_bat = demand + aux). Latches give both
// criteria a release margin so the engine does not chatter.
class RuleBased {
public:
  RuleBased(const RuleBasedConfig& cfg, const SplitParams& split, const StateBounds& bounds);

  // Total battery power command for a 1 s step. Saturates at the battery and
  // engine limits and refuses charge that would overshoot the SOC box top.
  double step(const PlantState& state, double demand);

  bool engine_commanded_on() const { return engine_on_; }

private:
  RuleBasedConfig cfg_;
  SplitParams split_;
  StateBounds bounds_;
  bool init_ = false;
  bool thermal_ = false;   // heat latch: arm below floor + 0.75, release at floor + 2
  bool charging_ = false;  // charge latch: arm below soc_low, release at soc_high
  bool engine_on_ = false;
};

// Free-function form of one rule evaluation; latches live in the state object.
double rule_based_step(RuleBased& controller, const PlantState& state, double demand);

struct BaselineMpcConfig {
  int horizon_steps = 20;   // fine 1 s nodes
  double lambda = 10.0;     // kg per unit terminal SOC^2
  double soc_ref = 0.6;
};

struct MhMpcConfig {
  int n = 20;          // fine nodes
  double dt1 = 1.0;    // s
  double dt2 = 20.0;   // s
  double terminal_band = 0.01;  // fraction of soc_init
  double soc_init = 0.6;
};

// Everything an optimizing controller needs besides its own config.
struct ControllerContext {
  SplitParams split;
  ThermalParams thermal;
  AlphaCurve alpha;
  StateBounds bounds;
  RoadLoadParams road;
  double solver_tol = 1e-6;
  int solver_max_iter = 100;
};

struct MpcStep {
  double p_bat = 0.0;
  NlpSolution solution;
  bool fell_back = false;  // rule-based fallback applied this instant
};

// Receding-horizon MPC: all-fine horizon of H steps (truncated at trip end),
// quadratic terminal penalty toward soc_ref, warm-started from the previous
// solution shifted by one step.
class BaselineMpc {
public:
  BaselineMpc(const BaselineMpcConfig& cfg, const ControllerContext& ctx,
              const RuleBasedConfig& fallback_cfg = {});

  MpcStep step(const PlantState& state, int t, const Preview& preview, int t_end);

private:
  BaselineMpcConfig cfg_;
  ControllerContext ctx_;
  RuleBased fallback_;
  std::vector<double> warm_;
};

// Multi-rate horizon MPC: N fine nodes then coarse nodes to trip end, hard
// terminal SOC interval soc_init * (1 +- band). Infeasible solves are retried
// with the slack relaxation. Warm start shifts the previous solution by one
// fine node; nodes crossing the fine/coarse boundary inherit the value of the
// previous node covering their start time.
class MhMpc {
public:
  MhMpc(const MhMpcConfig& cfg, const ControllerContext& ctx,
        const RuleBasedConfig& fallback_cfg = {});

  MpcStep step(const PlantState& state, int t, const std::vector<double>& fine_speeds,
               const std::vector<double>& coarse_speeds, int t_end);

private:
  MhMpcConfig cfg_;
  ControllerContext ctx_;
  RuleBased fallback_;
  std::vector<double> warm_u_;
  std::vector<double> warm_t0_, warm_dur_;  // node spans of the stored solution
};

}  // namespace hevsim
