#include "hevsim/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "hevsim/horizon.hpp"

namespace hevsim {

RuleBased::RuleBased(const RuleBasedConfig& cfg, const SplitParams& split,
                     const StateBounds& bounds)
    : cfg_(cfg), split_(split), bounds_(bounds) {
  if (!(cfg.soc_low < cfg.soc_high) || cfg.soc_low < bounds.soc_min ||
      cfg.soc_high > bounds.soc_max)
    throw ValidationError("rule-based SOC band must sit inside the SOC box");
  if (cfg.t_cl_floor < bounds.t_cl_min)
    throw ValidationError("rule-based coolant floor below the temperature box");
}

double RuleBased::step(const PlantState& state, double demand) {
  const double arm = cfg_.t_cl_floor + 0.75;
  const double release = cfg_.t_cl_floor + 2.0;
  if (!init_) {
    charging_ = state.soc < cfg_.soc_low;
    init_ = true;
  }
  if (state.t_cl < arm)
    thermal_ = true;
  else if (state.t_cl >= release)
    thermal_ = false;
  if (state.soc < cfg_.soc_low) charging_ = true;
  if (state.soc >= cfg_.soc_high) charging_ = false;

  engine_on_ = thermal_ || charging_ || demand >= cfg_.engine_on_power;

  double u;
  if (engine_on_) {
    // Load-following keeps the battery neutral; charge_power is added while
    // the charge latch holds, or when the coolant is genuinely short of the
    // floor and there is headroom to bank the heat byproduct.
    const bool assist =
        state.t_cl < cfg_.t_cl_floor + 0.25 && state.soc < 0.78 && demand > 0.0;
    const double charge = (charging_ || assist) ? cfg_.charge_power : 0.0;
    const double pe_cmd = std::max(demand, 0.0) + split_.aux_power + charge;
    u = demand + split_.aux_power - pe_cmd;
  } else {
    u = demand + split_.aux_power;  // EV mode
  }

  const InputBounds b = input_bounds(demand, state.soc, split_);
  u = std::clamp(u, b.lo, b.hi);
  // Exact inverse of the 1 s SOC update: never charge past the box top.
  const double headroom = bounds_.soc_max - state.soc;
  u = std::max(u, battery_power_for_soc_rate(state.soc, headroom, split_.battery));
  return u;
}

double rule_based_step(RuleBased& controller, const PlantState& state, double demand) {
  return controller.step(state, demand);
}

namespace {

// Piecewise-constant lookup of a previous solution over time; beyond the last
// node the last value extends.
double value_at(const std::vector<double>& u, const std::vector<double>& t0,
                const std::vector<double>& dur, double t) {
  for (std::size_t i = 0; i < u.size(); ++i)
    if (t < t0[i] + dur[i]) return u[i];
  return u.back();
}

}  // namespace

BaselineMpc::BaselineMpc(const BaselineMpcConfig& cfg, const ControllerContext& ctx,
                         const RuleBasedConfig& fallback_cfg)
    : cfg_(cfg), ctx_(ctx), fallback_(fallback_cfg, ctx.split, ctx.bounds) {
  if (cfg.horizon_steps < 1 || cfg.lambda < 0.0)
    throw ValidationError("baseline MPC needs horizon_steps >= 1 and lambda >= 0");
}

MpcStep BaselineMpc::step(const PlantState& state, int t, const Preview& preview, int t_end) {
  const int h = std::min(cfg_.horizon_steps, t_end - t);
  std::vector<double> fine(preview.fine.begin(), preview.fine.begin() + h);

  OcpSpec spec;
  spec.horizon = build(t, t + h, h, 1.0, 1.0, fine, {}, ctx_.road);
  spec.initial_state = state;
  spec.split = ctx_.split;
  spec.thermal = ctx_.thermal;
  spec.alpha = ctx_.alpha;
  spec.bounds = ctx_.bounds;
  spec.terminal_penalty = TerminalPenalty{cfg_.lambda, cfg_.soc_ref};

  Transcription tr(std::move(spec));
  std::optional<std::vector<double>> warm;
  if (!warm_.empty()) {
    std::vector<double> w(warm_.begin() + std::min<std::size_t>(1, warm_.size() - 1),
                          warm_.end());
    w.resize(h, w.back());
    warm = std::move(w);
  }
  MpcStep out;
  out.solution = solve(tr, warm, ctx_.solver_tol, ctx_.solver_max_iter);
  if (out.solution.status == SolveStatus::infeasible) {
    out.fell_back = true;
    out.p_bat = fallback_.step(state, tr.spec().horizon.nodes.front().power_demand);
    warm_.clear();
    return out;
  }
  warm_ = out.solution.p_bat_sequence;
  out.p_bat = out.solution.p_bat_sequence.front();
  return out;
}

MhMpc::MhMpc(const MhMpcConfig& cfg, const ControllerContext& ctx,
             const RuleBasedConfig& fallback_cfg)
    : cfg_(cfg), ctx_(ctx), fallback_(fallback_cfg, ctx.split, ctx.bounds) {
  if (cfg.n < 1 || !(cfg.dt2 >= cfg.dt1) || !(cfg.terminal_band > 0.0))
    throw ValidationError("multi-rate MPC needs n >= 1, dt2 >= dt1, terminal_band > 0");
}

MpcStep MhMpc::step(const PlantState& state, int t, const std::vector<double>& fine_speeds,
                    const std::vector<double>& coarse_speeds, int t_end) {
  OcpSpec spec;
  spec.horizon =
      build(t, t_end, cfg_.n, cfg_.dt1, cfg_.dt2, fine_speeds, coarse_speeds, ctx_.road);
  spec.initial_state = state;
  spec.split = ctx_.split;
  spec.thermal = ctx_.thermal;
  spec.alpha = ctx_.alpha;
  spec.bounds = ctx_.bounds;
  spec.terminal_constraint = TerminalInterval{cfg_.soc_init * (1.0 - cfg_.terminal_band),
                                              cfg_.soc_init * (1.0 + cfg_.terminal_band)};

  const Horizon& hz = spec.horizon;
  std::vector<double> t0, dur;
  for (const auto& node : hz.nodes) {
    t0.push_back(node.start_time);
    dur.push_back(node.duration);
  }

  Transcription tr(std::move(spec));
  std::optional<std::vector<double>> warm;
  if (!warm_u_.empty()) {
    std::vector<double> w(t0.size());
    for (std::size_t i = 0; i < t0.size(); ++i)
      w[i] = value_at(warm_u_, warm_t0_, warm_dur_, t0[i]);
    warm = std::move(w);
  }

  MpcStep out;
  if (warm) {
    out.solution = solve(tr, warm, ctx_.solver_tol, ctx_.solver_max_iter);
  } else {
    // Cold start. The affine fuel map makes the landscape multi-basin (engine
    // schedules are effectively combinatorial) and the first plan anchors
    // every later warm start, so multi-start over structurally distinct
    // candidates: all-zero, engine-off, and a family of batched plans that
    // run the engine only on the few highest-energy nodes. Keep the best
    // feasible solution. The extra starts cost several full solves, so cap
    // them to horizons of modest size; past the cap a single zero start
    // stands (near single-rate resolution the coarse tail that motivates the
    // batched candidates is gone anyway).
    out.solution = solve(tr, std::nullopt, ctx_.solver_tol, ctx_.solver_max_iter);
    const auto& nodes = tr.spec().horizon.nodes;
    const std::size_t n = nodes.size();
    const std::size_t kMultiStartNodeCap = 200;
    if (n <= kMultiStartNodeCap) {
      std::vector<double> ev(n);
      for (std::size_t i = 0; i < n; ++i)
        ev[i] = std::clamp(nodes[i].power_demand + ctx_.split.aux_power, tr.lower()[i],
                           tr.upper()[i]);
      std::vector<std::size_t> by_energy(n);
      for (std::size_t i = 0; i < n; ++i) by_energy[i] = i;
      std::sort(by_energy.begin(), by_energy.end(), [&](std::size_t a, std::size_t b) {
        return nodes[a].power_demand * nodes[a].duration >
               nodes[b].power_demand * nodes[b].duration;
      });
      auto consider = [&](const NlpSolution& alt) {
        const bool out_ok = out.solution.status != SolveStatus::infeasible;
        const bool alt_ok = alt.status != SolveStatus::infeasible;
        if ((alt_ok && !out_ok) || (alt_ok == out_ok && alt.objective < out.solution.objective))
          out.solution = alt;
      };
      consider(solve(tr, ev, ctx_.solver_tol, ctx_.solver_max_iter));
      for (std::size_t batched : {2u, 3u, 4u, 6u, 8u}) {
        if (batched > n) break;
        std::vector<double> u = ev;
        for (std::size_t j = 0; j < batched; ++j) {
          const std::size_t i = by_energy[j];
          u[i] = std::clamp(nodes[i].power_demand + ctx_.split.aux_power - 15000.0,
                            tr.lower()[i], tr.upper()[i]);
        }
        consider(solve(tr, u, ctx_.solver_tol, ctx_.solver_max_iter));
      }
    }
  }
  if (out.solution.status == SolveStatus::infeasible) {
    // Terminal interval unreachable from here: trade constraint satisfaction
    // for a large penalty and keep driving.
    out.solution = solve(tr, warm, ctx_.solver_tol, ctx_.solver_max_iter, true);
  }
  if (out.solution.status == SolveStatus::infeasible) {
    out.fell_back = true;
    out.p_bat = fallback_.step(state, tr.spec().horizon.nodes.front().power_demand);
    warm_u_.clear();
    return out;
  }
  warm_u_ = out.solution.p_bat_sequence;
  warm_t0_ = std::move(t0);
  warm_dur_ = std::move(dur);
  out.p_bat = out.solution.p_bat_sequence.front();
  return out;
}

}  // namespace hevsim
