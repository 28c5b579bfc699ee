#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hevsim/controllers.hpp"
#include "hevsim/dp.hpp"

namespace hevsim {

// Full description of one closed-loop experiment. Every field has a default;
// a config file or CLI flags override selectively (schema in README).
struct ExperimentConfig {
  std::string cycle_path;
  std::string controller = "rule";  // rule | baseline-mpc | mh-mpc | dp
  std::string out_dir = "out";
  std::string label;  // defaults to the controller name
  std::uint64_t seed = 0;

  double soc_init = 0.6;
  double t_cl_init = 50.0;

  PreviewModel preview_model;
  RuleBasedConfig rule;
  BaselineMpcConfig baseline;
  MhMpcConfig mh;
  double solver_tol = 1e-6;
  int solver_max_iter = 100;

  SplitParams split;
  ThermalParams thermal;
  AlphaCurve alpha;
  StateBounds bounds;
  RoadLoadParams road;

  int dp_soc_points = 81;
  int dp_t_cl_points = 26;
  int dp_control_points = 41;
  double dp_terminal_band = 0.01;
  std::string dp_policy_cache;  // reuse/persist the expensive solve when set

  // Parse overrides from JSON text (missing keys keep defaults). Throws
  // ConfigError on unknown controllers or malformed values.
  void apply_json_text(const std::string& text);
  static ExperimentConfig from_json_file(const std::string& path);
};

struct RunReport {
  std::string label;
  std::string cycle;
  double total_fuel = 0.0;  // kg
  double terminal_soc = 0.0;
  double terminal_soc_error = 0.0;  // terminal - initial
  double terminal_t_cl = 0.0;
  double soc_violation = 0.0;   // integral outside the SOC box, fraction*s
  double t_cl_violation = 0.0;  // integral outside the temperature box, degC*s
  double soc_min = 0.0, soc_max = 0.0;
  double t_cl_min_after_first = 0.0;
  double solve_min = 0.0, solve_mean = 0.0, solve_max = 0.0;  // s, wall clock
  double slack_total = 0.0;  // scaled violation the relaxed solves accepted
  int relaxed_steps = 0;
  int fallback_steps = 0;
  std::string trajectory_path;

  std::string to_json() const;
};

// Run the closed loop at 1 s: preview, controller step, power split, map
// lookups, plant step. Writes <out_dir>/<label>_<cycle>.csv (columns t, v,
// P_d, p_bat, p_eng, fuel_rate, soc, t_cl, solve_time, status; soc/t_cl are
// the pre-step state; solve_time holds the deterministic solver iteration
// count so reruns are byte-identical, wall-clock stats live in the report)
// and <label>_<cycle>_summary.json.
RunReport run(const ExperimentConfig& cfg);

struct TrajectoryRow {
  double t, v, p_d, p_bat, p_eng, fuel_rate, soc, t_cl, solve_time;
  std::string status;
};

std::vector<TrajectoryRow> read_trajectory(const std::string& path);

struct AuditResult {
  double soc_residual = 0.0;   // worst |soc_{k+1} - Euler update|
  double t_cl_residual = 0.0;  // same for the coolant state
  double fuel_mismatch = 0.0;  // |sum fuel_rate*dt - reported total|
};

// Recompute the plant updates from a logged trajectory and compare against the
// logged states and the report totals.
AuditResult audit_trajectory(const std::vector<TrajectoryRow>& rows, const RunReport& report,
                             const ExperimentConfig& cfg);

struct Comparison {
  std::string reference_label;
  struct Row {
    std::string label;
    double total_fuel;
    double saving_pct;  // vs reference
    double terminal_soc_error;
    double solve_mean;
  };
  std::vector<Row> rows;

  std::string to_csv() const;
  std::string to_text() const;  // aligned columns
};

// Percent savings vs the named reference report. Throws ConfigError when the
// reference is missing or the reports mix cycles.
Comparison compare(const std::vector<RunReport>& reports, const std::string& reference_label);

}  // namespace hevsim
