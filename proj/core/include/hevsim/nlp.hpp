#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "hevsim/ocp.hpp"

namespace hevsim {

// converged carries one of two certificates. Either the smooth first-order
// test passed (kkt_residual <= tol), or the iterate is feasible with clean
// complementarity and neither the line search nor the switch-point probes can
// find any improving step at the final inner tolerance. The second case is the
// expected exit when the optimum sits at an engine on/off switch, where the
// objective is discontinuous through the heat input and no smooth certificate
// exists; stationary_stalled marks it and kkt_residual reports the measured
// smooth-side residual, which then legitimately exceeds tol.
enum class SolveStatus { converged, max_iter, infeasible };

const char* to_string(SolveStatus s);

struct NlpSolution {
  std::vector<double> p_bat_sequence;        // W per node
  std::vector<PlantState> predicted_states;  // node count + 1
  double objective = 0.0;                    // kg, stage-cost sum of the rollout
  double kkt_residual = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::max_iter;
  double solve_time = 0.0;  // s
  // Diagnostics. merit_history holds (outer iteration, merit after accepted
  // step); merit is non-increasing within each outer iteration.
  std::vector<std::pair<int, double>> merit_history;
  double constraint_violation = 0.0;  // max scaled residual at the solution
  bool relaxed = false;               // solved with the slack relaxation
  double slack_total = 0.0;           // sum of scaled box violations when relaxed
  bool stationary_stalled = false;    // converged via the probe certificate
};

// Single-shooting transcription: the decision vector is the battery power per
// node, states are eliminated by a forward plant rollout, and the state boxes
// become path inequalities at every node end.
//
// Scaling (also the units of kkt_residual and tol): decision variables are
// divided by 1e4 W, SOC residuals are used as-is, and temperature residuals
// are divided by 50 degC, so all quantities the solver compares are O(1).
class Transcription {
public:
  explicit Transcription(OcpSpec spec);

  int num_variables() const { return n_; }
  // One inequality per state box per node end (each box counted once).
  int num_path_inequalities() const { return 2 * n_; }
  int num_terminal_inequalities() const { return spec_.terminal_constraint ? 2 : 0; }

  const std::vector<double>& lower() const { return lo_; }  // W
  const std::vector<double>& upper() const { return hi_; }  // W
  const OcpSpec& spec() const { return spec_; }

  struct Rollout {
    std::vector<PlantState> states;  // n + 1
    std::vector<double> stage;       // kg per node
    double objective = 0.0;          // kg, sum of stage
  };
  Rollout rollout(const std::vector<double>& p_bat) const;

  double objective(const std::vector<double>& p_bat) const;
  // Adjoint gradient of the stage-cost sum, d objective / d p_bat [kg/W].
  std::vector<double> objective_gradient(const std::vector<double>& p_bat) const;

  // Scaled residuals g <= 0: path boxes (4 per node end: soc lo/hi, t_cl
  // lo/hi), then the terminal interval when present.
  std::vector<double> constraints(const std::vector<double>& p_bat) const;

private:
  friend class AugmentedLagrangianSolver;

  struct NodeDerivs;
  Rollout roll(const std::vector<double>& p_bat) const;

  OcpSpec spec_;
  int n_ = 0;
  std::vector<double> lo_, hi_;  // W
};

// Solve to the stated convergence contract: status == converged implies the
// KKT residual and every scaled constraint residual are within tol. On
// max_iter the best feasible iterate seen is returned. relax_with_slack moves
// the state/terminal constraints into the objective at 1e4 kg per unit scaled
// violation (the MPC fallback when the constrained problem is infeasible).
NlpSolution solve(const Transcription& nlp,
                  const std::optional<std::vector<double>>& warm_start = std::nullopt,
                  double tol = 1e-6, int max_iter = 100, bool relax_with_slack = false);

}  // namespace hevsim
