#include "hevsim/horizon.hpp"

#include <cmath>
#include <string>

namespace hevsim {

Horizon build(double t_now, double t_end, int n, double dt1, double dt2,
              const std::vector<double>& fine_speeds, const std::vector<double>& coarse_speeds,
              const RoadLoadParams& rl) {
  if (!(t_now < t_end)) throw ValidationError("horizon build requires t_now < t_end");
  if (n < 1 || !(dt1 > 0.0) || !(dt2 >= dt1))
    throw ValidationError("horizon build requires n >= 1 and dt2 >= dt1 > 0");

  const double remaining = t_end - t_now;
  const int n_fine = std::min<long>(n, static_cast<long>(std::ceil(remaining / dt1 - 1e-9)));
  const double fine_span = std::min(remaining, n_fine * dt1);
  const double tail = remaining - n_fine * dt1;
  const int n_coarse = tail > 1e-9 ? static_cast<int>(std::ceil(tail / dt2 - 1e-9)) : 0;

  if (static_cast<int>(fine_speeds.size()) != n_fine)
    throw SizeMismatch("fine speed list has " + std::to_string(fine_speeds.size()) +
                       " entries, horizon needs " + std::to_string(n_fine));
  if (static_cast<int>(coarse_speeds.size()) != n_coarse)
    throw SizeMismatch("coarse speed list has " + std::to_string(coarse_speeds.size()) +
                       " entries, horizon needs " + std::to_string(n_coarse));

  Horizon h;
  h.t_now = t_now;
  h.t_end = t_end;
  h.n_fine = n_fine;
  h.cfg_n = n;
  h.cfg_dt1 = dt1;
  h.cfg_dt2 = dt2;
  h.nodes.reserve(n_fine + n_coarse);

  double t = t_now;
  for (int i = 0; i < n_fine; ++i) {
    const double dur = (i == n_fine - 1 && n_coarse == 0) ? fine_span - (n_fine - 1) * dt1 : dt1;
    h.nodes.push_back({t, dur, fine_speeds[i], 0.0, Segment::fine});
    t += dur;
  }
  for (int j = 0; j < n_coarse; ++j) {
    const double dur = (j == n_coarse - 1) ? t_end - t : dt2;
    h.nodes.push_back({t, dur, coarse_speeds[j], 0.0, Segment::coarse});
    t += dur;
  }
  // Exact tiling regardless of float drift.
  h.nodes.back().duration += t_end - (h.nodes.back().start_time + h.nodes.back().duration);

  // Node speeds are averages over the node, so the speed difference between
  // neighbours spans the gap between node midpoints. Dividing by the current
  // duration instead would inflate the acceleration at a fine/coarse seam by
  // dt2/dt1 and manufacture demands no plant can meet.
  double accel = 0.0;
  const std::size_t m = h.nodes.size();
  for (std::size_t i = 0; i < m; ++i) {
    if (i + 1 < m)
      accel = (h.nodes[i + 1].speed - h.nodes[i].speed) /
              (0.5 * (h.nodes[i].duration + h.nodes[i + 1].duration));
    h.nodes[i].power_demand = power_demand(h.nodes[i].speed, accel, rl);
  }
  return h;
}

Horizon advance(const Horizon& h, double dt, const std::vector<double>& fine_speeds,
                const std::vector<double>& coarse_speeds, const RoadLoadParams& rl) {
  if (h.t_now + dt >= h.t_end - 1e-9) throw EndOfTrip("horizon exhausted");
  return build(h.t_now + dt, h.t_end, h.cfg_n, h.cfg_dt1, h.cfg_dt2, fine_speeds,
               coarse_speeds, rl);
}

}  // namespace hevsim
