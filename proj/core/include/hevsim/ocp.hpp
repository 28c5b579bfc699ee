#pragma once

#include <array>
#include <functional>
#include <optional>

#include "hevsim/horizon.hpp"
#include "hevsim/split.hpp"

namespace hevsim {

// Cost of one horizon node as a function of its pre-step state and the total
// battery power command. gradient (optional) returns the partials with respect
// to (p_bat, soc, t_cl); when absent the transcription falls back to central
// finite differences of value.
struct StageCost {
  std::function<double(int node, const PlantState& state, double p_bat)> value;
  std::function<std::array<double, 3>(int node, const PlantState& state, double p_bat)>
      gradient;
};

struct TerminalInterval {
  double soc_lo = 0.0;
  double soc_hi = 1.0;
};

struct TerminalPenalty {
  double weight = 10.0;  // kg per unit SOC^2
  double soc_ref = 0.6;
};

// One horizon-based optimal-control problem. At most one of the two terminal
// options may be set.
struct OcpSpec {
  Horizon horizon;
  PlantState initial_state;
  SplitParams split;
  ThermalParams thermal;
  AlphaCurve alpha;
  StateBounds bounds;
  StageCost stage_cost;  // empty value -> fuel cost from the maps
  // Optional extra box intersected with the per-node feasibility bounds.
  std::optional<InputBounds> input_box;
  std::optional<TerminalInterval> terminal_constraint;
  std::optional<TerminalPenalty> terminal_penalty;
};

// Fuel burned over each node: duration * corrected fuel rate at the engine
// power implied by the node demand and the battery command, except that the
// idle term is ramped in linearly over the first 50 W of engine power. The
// exact map steps from 0 to the idle rate at P_eng = 0+, and on braking nodes
// that switch lies strictly inside the control box where a discontinuity would
// defeat the gradient solver. The ramp is strictly increasing, so minimizers
// still land on P_eng = 0 exactly; the plant dynamics and the closed-loop
// simulator always burn the exact map. Ships analytic partials for the
// adjoint sweep.
StageCost make_fuel_stage_cost(const Horizon& horizon, const SplitParams& split,
                               const AlphaCurve& alpha);

}  // namespace hevsim
