#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hevsim/errors.hpp"
#include "hevsim/maps.hpp"

namespace hevsim {

// Speed trace sampled at 1 Hz. Node t covers [t, t+1); duration() is both the
// number of simulation steps and t_end for horizon construction.
struct DriveCycle {
  std::string name;
  std::vector<double> speeds;  // m/s

  int duration() const { return static_cast<int>(speeds.size()); }
  double distance() const;  // m, rectangle rule
};

// Two-tier speed forecast: an exact short window plus noisy block-means of the
// remainder of the trip.
struct PreviewModel {
  int accurate_window = 20;  // s
  int coarse_step = 20;      // s
  double noise_std = 0.0;    // m/s, coarse segment only
  std::uint64_t seed = 0;
};

struct Preview {
  std::vector<double> fine;    // exact speeds over [t, t+window)
  std::vector<double> coarse;  // block-means over [t+window, t_end)
};

struct LoadResult {
  DriveCycle cycle;
  std::vector<std::string> warnings;
};

// Parse a time/speed table (CSV or whitespace, '#' comments). Non-uniform
// sampling is resampled to 1 s by linear interpolation with a warning.
LoadResult load_cycle(const std::string& path);
LoadResult load_cycle_text(const std::string& text, const std::string& origin);

// Forecast as seen at time t. Throws OutOfRange when t is outside [0, t_end).
// Deterministic given (cycle, t, pm): bin noise is hashed from (seed, t, bin).
Preview preview(const DriveCycle& cycle, int t, const PreviewModel& pm);

// Power demand per node from a speed list with forward-difference acceleration;
// the last node reuses the previous node's acceleration.
std::vector<double> demand_profile(const std::vector<double>& speeds, double step,
                                   const RoadLoadParams& rl);

}  // namespace hevsim
