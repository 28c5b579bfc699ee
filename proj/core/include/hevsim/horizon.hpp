#pragma once

#include <vector>

#include "hevsim/cycle.hpp"
#include "hevsim/errors.hpp"
#include "hevsim/maps.hpp"

namespace hevsim {

enum class Segment { fine, coarse };

struct HorizonNode {
  double start_time = 0.0;  // s
  double duration = 0.0;    // s
  double speed = 0.0;       // m/s
  double power_demand = 0.0;  // W
  Segment segment = Segment::fine;
};

// Multi-rate decision grid: N fine nodes at dt1 followed by coarse nodes at
// dt2 shrinking to trip end. Nodes tile [t_now, t_end] exactly.
struct Horizon {
  std::vector<HorizonNode> nodes;
  double t_now = 0.0;
  double t_end = 0.0;
  int n_fine = 0;
  // build parameters, kept so advance() can rebuild with the same shape
  int cfg_n = 0;
  double cfg_dt1 = 1.0;
  double cfg_dt2 = 1.0;
};

// Node demand uses forward-difference acceleration across consecutive node
// speeds over the spacing between node midpoints; the last node reuses the
// previous acceleration (single node: zero).
Horizon build(double t_now, double t_end, int n, double dt1, double dt2,
              const std::vector<double>& fine_speeds, const std::vector<double>& coarse_speeds,
              const RoadLoadParams& rl);

// Rebuild one step later from a fresh preview. Throws EndOfTrip when
// t_now + dt >= t_end.
Horizon advance(const Horizon& h, double dt, const std::vector<double>& fine_speeds,
                const std::vector<double>& coarse_speeds, const RoadLoadParams& rl);

}  // namespace hevsim
