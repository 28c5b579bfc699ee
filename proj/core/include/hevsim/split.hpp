#pragma once

#include <algorithm>

#include "hevsim/maps.hpp"
#include "hevsim/plant.hpp"

namespace hevsim {

// Friction-blend power split. The battery command p_bat is the total terminal
// power including the accessory draw; the engine covers what is left of
// demand + aux and can only add power (friction brakes absorb the rest).
struct SplitParams {
  BatteryParams battery;
  EngineMap engine;
  double aux_power = 300.0;  // W, constant electrical accessories
};

struct InputBounds {
  double lo = 0.0;
  double hi = 0.0;
};

// Engine power implied by a battery command, saturated to the engine's range.
inline double engine_power_for(double demand, double p_bat, const SplitParams& sp) {
  const double p = demand + sp.aux_power - p_bat;
  return std::clamp(p, 0.0, sp.engine.p_eng_max);
}

// Battery commands at one node that keep the engine within [0, p_eng_max] and
// the battery within its box and circuit feasibility cap. The upper bound
// aux + max(demand, 0) is where the engine turns off; discharging beyond it
// would have nowhere to send the power.
inline InputBounds input_bounds(double demand, double soc, const SplitParams& sp) {
  double lo =
      std::max(sp.battery.p_bat_min, demand + sp.aux_power - sp.engine.p_eng_max);
  const double hi =
      std::min({sp.battery.p_bat_max, sp.aux_power + std::max(demand, 0.0),
                sp.battery.feasible_power_cap(soc)});
  lo = std::min(lo, hi);  // demand beyond combined capability: engine saturates
  return {lo, hi};
}

}  // namespace hevsim
