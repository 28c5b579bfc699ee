#include "hevsim/nlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace hevsim {

namespace {
constexpr double kControlScale = 1e4;  // W per scaled unit
constexpr double kTempScale = 50.0;    // degC per scaled unit
constexpr double kSlackWeight = 1e4;   // kg per unit scaled violation
constexpr double kSlackSmooth = 1e-8;
// The idle term of the fuel map is discontinuous at P_eng = 0. For braking
// nodes the switch sits strictly inside the control box, which starves any
// gradient method. The optimization stage cost therefore ramps the idle term
// linearly over the first few tens of watts; the plant dynamics and the
// simulator keep the exact map, and the ramp has no interior stationary point,
// so minimizers land on P_eng = 0 exactly or well above the ramp.
constexpr double kIdleRampWatts = 50.0;

double smooth_hinge(double g) { return 0.5 * (g + std::sqrt(g * g + kSlackSmooth * kSlackSmooth)); }
double smooth_hinge_d(double g) {
  return 0.5 * (1.0 + g / std::sqrt(g * g + kSlackSmooth * kSlackSmooth));
}
}  // namespace

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

StageCost make_fuel_stage_cost(const Horizon& horizon, const SplitParams& split,
                               const AlphaCurve& alpha) {
  std::vector<double> demand, dur;
  for (const auto& node : horizon.nodes) {
    demand.push_back(node.power_demand);
    dur.push_back(node.duration);
  }
  StageCost sc;
  sc.value = [demand, dur, split, alpha](int i, const PlantState& st, double u) {
    const double pe = engine_power_for(demand[i], u, split);
    const double ramp = std::min(1.0, pe / kIdleRampWatts);
    const double fr_nom =
        split.engine.idle_fuel_rate * ramp + split.engine.willans_slope * pe;
    return dur[i] * alpha(st.t_cl) * fr_nom;
  };
  sc.gradient = [demand, dur, split, alpha](int i, const PlantState& st,
                                            double u) -> std::array<double, 3> {
    const double raw = demand[i] + split.aux_power - u;
    const double pe = std::clamp(raw, 0.0, split.engine.p_eng_max);
    if (pe <= 0.0) return {0.0, 0.0, 0.0};
    const double a = alpha(st.t_cl);
    const double h = 1e-6;
    const double da = (alpha(st.t_cl + h) - alpha(st.t_cl - h)) / (2.0 * h);
    const double dpe_du = (raw > 0.0 && raw < split.engine.p_eng_max) ? -1.0 : 0.0;
    const double ramp = std::min(1.0, pe / kIdleRampWatts);
    const double dramp = pe < kIdleRampWatts ? 1.0 / kIdleRampWatts : 0.0;
    const double fr_nom =
        split.engine.idle_fuel_rate * ramp + split.engine.willans_slope * pe;
    const double dfr_dpe = split.engine.idle_fuel_rate * dramp + split.engine.willans_slope;
    return {dur[i] * a * dfr_dpe * dpe_du, 0.0, dur[i] * da * fr_nom};
  };
  return sc;
}

Transcription::Transcription(OcpSpec spec) : spec_(std::move(spec)) {
  if (spec_.terminal_constraint && spec_.terminal_penalty)
    throw ValidationError("at most one terminal condition may be set");
  n_ = static_cast<int>(spec_.horizon.nodes.size());
  if (n_ < 1) throw ValidationError("empty horizon");
  if (!spec_.stage_cost.value)
    spec_.stage_cost = make_fuel_stage_cost(spec_.horizon, spec_.split, spec_.alpha);
  lo_.resize(n_);
  hi_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    InputBounds b =
        input_bounds(spec_.horizon.nodes[i].power_demand, spec_.initial_state.soc, spec_.split);
    if (spec_.input_box) {
      b.lo = std::max(b.lo, spec_.input_box->lo);
      b.hi = std::min(b.hi, spec_.input_box->hi);
      if (b.lo > b.hi) b.lo = b.hi;
    }
    lo_[i] = b.lo;
    hi_[i] = b.hi;
  }
}

Transcription::Rollout Transcription::roll(const std::vector<double>& p_bat) const {
  if (static_cast<int>(p_bat.size()) != n_)
    throw SizeMismatch("decision vector length does not match horizon");
  Rollout r;
  r.states.resize(n_ + 1);
  r.stage.resize(n_);
  r.states[0] = spec_.initial_state;
  for (int i = 0; i < n_; ++i) {
    const auto& node = spec_.horizon.nodes[i];
    const PlantState& st = r.states[i];
    // Stay strictly inside the circuit feasibility cap so soc_derivative never
    // throws; with in-box commands this clamp is inactive.
    const double u = std::min(p_bat[i], spec_.split.battery.feasible_power_cap(st.soc));
    const double pe = engine_power_for(node.power_demand, u, spec_.split);
    const double fr = corrected_fuel_rate(pe, st.t_cl, spec_.split.engine, spec_.alpha);
    r.stage[i] = spec_.stage_cost.value(i, st, u);
    r.objective += r.stage[i];
    r.states[i + 1] =
        step(st, {u, pe, fr, node.speed}, node.duration, spec_.split.battery, spec_.thermal)
            .state;
  }
  return r;
}

Transcription::Rollout Transcription::rollout(const std::vector<double>& p_bat) const {
  return roll(p_bat);
}

double Transcription::objective(const std::vector<double>& p_bat) const {
  return roll(p_bat).objective;
}

std::vector<double> Transcription::constraints(const std::vector<double>& p_bat) const {
  const Rollout r = roll(p_bat);
  std::vector<double> g;
  g.reserve(4 * n_ + 2);
  for (int k = 1; k <= n_; ++k) {
    const auto& st = r.states[k];
    g.push_back(spec_.bounds.soc_min - st.soc);
    g.push_back(st.soc - spec_.bounds.soc_max);
    g.push_back((spec_.bounds.t_cl_min - st.t_cl) / kTempScale);
    g.push_back((st.t_cl - spec_.bounds.t_cl_max) / kTempScale);
  }
  if (spec_.terminal_constraint) {
    g.push_back(spec_.terminal_constraint->soc_lo - r.states[n_].soc);
    g.push_back(r.states[n_].soc - spec_.terminal_constraint->soc_hi);
  }
  return g;
}

// Per-node linearization of the rollout used by the adjoint sweeps.
struct Transcription::NodeDerivs {
  double dsoc_dsoc = 1.0, dsoc_du = 0.0;  // next soc w.r.t. current soc / control
  double dt_dt = 1.0, dt_du = 0.0;        // next t_cl w.r.t. current t_cl / control
  std::array<double, 3> stage{};          // d stage / d (u, soc, t_cl)
};

namespace {

// Shared adjoint: gradient of sum(stage) + sum_k (seed_soc[k]*soc_k +
// seed_t[k]*t_cl_k) over the rollout, seeds indexed 0..n (0 unused).
std::vector<double> adjoint_gradient(const Transcription& tr, const OcpSpec& spec, int n,
                                     const std::vector<double>& u,
                                     const Transcription::Rollout& r,
                                     const std::vector<double>& seed_soc,
                                     const std::vector<double>& seed_t) {
  const auto& bp = spec.split.battery;
  const auto& tp = spec.thermal;
  std::vector<double> A(n + 1, 0.0), B(n + 1, 0.0), grad(n, 0.0);
  std::vector<double> dsds(n), dsdu(n), dTdT(n), dTdu(n);
  std::vector<std::array<double, 3>> sg(n);

  for (int i = 0; i < n; ++i) {
    const auto& node = spec.horizon.nodes[i];
    const PlantState& st = r.states[i];
    const double cap = bp.feasible_power_cap(st.soc);
    const double ue = std::min(u[i], cap);
    const double du_eff = u[i] <= cap ? 1.0 : 0.0;
    const double raw = node.power_demand + spec.split.aux_power - ue;
    const double pe = std::clamp(raw, 0.0, spec.split.engine.p_eng_max);
    const double dpe_du =
        (raw > 0.0 && raw < spec.split.engine.p_eng_max) ? -du_eff : 0.0;

    // battery branch
    const double uoc = bp.open_circuit_voltage(st.soc);
    const double rint = bp.internal_resistance(st.soc);
    const double disc = std::max(uoc * uoc - 4.0 * rint * ue, 1e-12);
    const double dfs_du = -du_eff / (bp.capacity_coulombs * std::sqrt(disc));
    const double hs = 1e-7;
    const double dfs_ds =
        (soc_derivative(std::min(st.soc + hs, 1.0), ue, bp) -
         soc_derivative(std::max(st.soc - hs, 0.0), ue, bp)) /
        (std::min(st.soc + hs, 1.0) - std::max(st.soc - hs, 0.0));

    // thermal branch
    const double a = spec.alpha(st.t_cl);
    const double hT = 1e-6;
    const double da = (spec.alpha(st.t_cl + hT) - spec.alpha(st.t_cl - hT)) / (2.0 * hT);
    const double on = pe > 0.0 ? 1.0 : 0.0;
    const double fr_nom =
        on * (spec.split.engine.idle_fuel_rate + spec.split.engine.willans_slope * pe);
    const double dfr_dT = da * fr_nom;
    const double dfr_dpe = on * a * spec.split.engine.willans_slope;
    const double comb = tp.fuel_lhv * (1.0 - tp.exhaust_fraction);
    const double hconv = tp.h0 + tp.h1 * node.speed;
    const double dfT_dT = (comb * dfr_dT - hconv) / tp.thermal_mass;
    const double dfT_du = dpe_du * (comb * dfr_dpe - 1.0) / tp.thermal_mass;

    const bool clamped = r.states[i + 1].soc <= 0.0 || r.states[i + 1].soc >= 1.0;
    dsds[i] = clamped ? 0.0 : 1.0 + node.duration * dfs_ds;
    dsdu[i] = clamped ? 0.0 : node.duration * dfs_du;
    dTdT[i] = 1.0 + node.duration * dfT_dT;
    dTdu[i] = node.duration * dfT_du;

    if (spec.stage_cost.gradient) {
      sg[i] = spec.stage_cost.gradient(i, st, ue);
    } else {
      const double hu = 1e-2, hss = 1e-8, htt = 1e-6;
      const auto f = [&](const PlantState& s, double uu) {
        return spec.stage_cost.value(i, s, uu);
      };
      sg[i] = {(f(st, ue + hu) - f(st, ue - hu)) / (2 * hu),
               (f({st.soc + hss, st.t_cl}, ue) - f({st.soc - hss, st.t_cl}, ue)) / (2 * hss),
               (f({st.soc, st.t_cl + htt}, ue) - f({st.soc, st.t_cl - htt}, ue)) / (2 * htt)};
      sg[i][0] *= du_eff;
    }
  }

  for (int k = 1; k <= n; ++k) {
    A[k] = seed_soc.empty() ? 0.0 : seed_soc[k];
    B[k] = seed_t.empty() ? 0.0 : seed_t[k];
  }
  for (int k = 0; k < n; ++k) {
    A[k] += sg[k][1];
    B[k] += sg[k][2];
  }
  for (int k = n - 1; k >= 0; --k) {
    A[k] += A[k + 1] * dsds[k];
    B[k] += B[k + 1] * dTdT[k];
    grad[k] = sg[k][0] + A[k + 1] * dsdu[k] + B[k + 1] * dTdu[k];
  }
  (void)tr;
  return grad;
}

}  // namespace

std::vector<double> Transcription::objective_gradient(const std::vector<double>& p_bat) const {
  const Rollout r = roll(p_bat);
  return adjoint_gradient(*this, spec_, n_, p_bat, r, {}, {});
}

// Augmented-Lagrangian solver: outer multiplier updates around an inner
// monotone projected Barzilai-Borwein descent on the box.
class AugmentedLagrangianSolver {
public:
  AugmentedLagrangianSolver(const Transcription& tr, double tol, int max_iter, bool relax)
      : tr_(tr), spec_(tr.spec()), n_(tr.num_variables()), tol_(tol), max_outer_(max_iter),
        relax_(relax) {
    for (double v : tr.lower()) xlo_.push_back(v / kControlScale);
    for (double v : tr.upper()) xhi_.push_back(v / kControlScale);
    m_ = relax_ ? 0 : static_cast<int>(tr.constraints(tr.lower()).size());
    lambda_.assign(m_, 0.0);
  }

  NlpSolution run(const std::optional<std::vector<double>>& warm) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<double> x(n_, 0.0);
    if (warm) {
      if (static_cast<int>(warm->size()) != n_)
        throw SizeMismatch("warm start length does not match variable count");
      for (int i = 0; i < n_; ++i) x[i] = (*warm)[i] / kControlScale;
    }
    project(x);

    NlpSolution out;
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<double> best_x;
    double viol_prev = std::numeric_limits<double>::infinity();
    double omega = 1e-2;
    int outer = 0;
    bool converged = false;

    const bool dbg = std::getenv("HEVSIM_NLP_DEBUG") != nullptr;
    int stalls = 0;
    for (outer = 0; outer < max_outer_ && !converged; ++outer) {
      const double decrease = inner_descent(x, std::max(tol_, omega), 200, outer, out);
      const bool moved = decrease > 1e-11;
      const double viol = max_violation(x);
      const double pg = projected_gradient_norm(x);
      if (dbg)
        std::fprintf(stderr, "outer %3d viol=%.3e pg=%.3e comp=%.3e rho=%.1e omega=%.1e\n",
                     outer, viol, pg, complementarity(x), rho_, omega);
      track_best(x, viol, best_obj, best_x);
      // In relax mode the boxes live in the objective as hinge terms, so the
      // certificates are about the penalized problem only.
      const bool feas_ok = relax_ || (viol <= tol_ && complementarity(x) <= tol_);
      if (pg <= tol_ && feas_ok) {
        converged = true;
        break;
      }
      // Probe-certified stationarity: at the final inner tolerance no
      // improving step exists, the iterate is feasible and complementarity is
      // clean. The smooth residual cannot certify optima that sit on an
      // engine on/off switch, so two consecutive fully stalled passes end the
      // solve as converged with the residual reported as measured.
      if (!moved && omega <= tol_) {
        ++stalls;
        if (feas_ok && stalls >= 2) {
          converged = true;
          out.stationary_stalled = true;
          break;
        }
        // Once the penalty has saturated, a stalled infeasible iterate will
        // not be cured by further multiplier updates; hand over to the
        // restoration path instead of spinning out the iteration budget.
        if (!feas_ok && rho_ >= 1e10 && stalls >= 2) break;
      } else {
        stalls = 0;
      }
      if (!relax_) {
        const auto g = tr_.constraints(unscale(x));
        for (int c = 0; c < m_; ++c) lambda_[c] = std::max(0.0, lambda_[c] + rho_ * g[c]);
        if (viol > 0.25 * viol_prev) rho_ = std::min(rho_ * 5.0, 1e10);
        viol_prev = viol;
      }
      omega = std::max(tol_, omega * 0.1);
    }

    double viol = max_violation(x);
    if (!converged && !relax_ && viol > tol_) {
      if (!best_x.empty()) {
        x = best_x;
        viol = max_violation(x);
      } else {
        restoration(x, out);
        viol = max_violation(x);
      }
    }

    const auto u = unscale(x);
    const auto r = tr_.rollout(u);
    out.p_bat_sequence = u;
    out.predicted_states = r.states;
    out.objective = r.objective;
    out.iterations = total_accepted_;
    out.kkt_residual =
        relax_ ? projected_gradient_norm(x)
               : std::max({projected_gradient_norm(x), viol, complementarity(x)});
    out.constraint_violation = viol;
    out.relaxed = relax_;
    if (relax_) {
      double s = 0.0;
      for (double g : tr_.constraints(u)) s += std::max(0.0, g);
      out.slack_total = s;
      out.status = (converged || out.kkt_residual <= tol_) ? SolveStatus::converged
                                                           : SolveStatus::max_iter;
    } else if (converged) {
      out.status = SolveStatus::converged;
    } else if (viol > kRestoreViol) {
      out.status = SolveStatus::infeasible;
    } else {
      out.status = SolveStatus::max_iter;
    }
    out.solve_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  }

private:
  static constexpr double kRestoreViol = 1e-4;

  std::vector<double> unscale(const std::vector<double>& x) const {
    std::vector<double> u(n_);
    for (int i = 0; i < n_; ++i) u[i] = x[i] * kControlScale;
    return u;
  }

  void project(std::vector<double>& x) const {
    for (int i = 0; i < n_; ++i) x[i] = std::clamp(x[i], xlo_[i], xhi_[i]);
  }

  // Merit and gradient (in scaled variables) of the current subproblem.
  double merit(const std::vector<double>& x) const {
    const auto u = unscale(x);
    const auto r = tr_.rollout(u);
    double f = r.objective + terminal_penalty(r.states.back().soc);
    const auto g = tr_.constraints(u);
    if (relax_) {
      for (double gc : g) f += kSlackWeight * smooth_hinge(gc);
    } else {
      for (int c = 0; c < m_; ++c) {
        const double t = lambda_[c] + rho_ * g[c];
        f += (std::max(0.0, t) * std::max(0.0, t) - lambda_[c] * lambda_[c]) / (2.0 * rho_);
      }
    }
    return f;
  }

  std::vector<double> merit_gradient(const std::vector<double>& x) const {
    const auto u = unscale(x);
    const auto r = tr_.rollout(u);
    const auto g = tr_.constraints(u);
    // constraint weights in order (soc lo, soc hi, t lo, t hi) per node end
    std::vector<double> seed_soc(n_ + 1, 0.0), seed_t(n_ + 1, 0.0);
    const auto weight = [&](int c) {
      if (relax_) return kSlackWeight * smooth_hinge_d(g[c]);
      return std::max(0.0, lambda_[c] + rho_ * g[c]);
    };
    for (int k = 1; k <= n_; ++k) {
      const int b = 4 * (k - 1);
      seed_soc[k] += -weight(b) + weight(b + 1);
      seed_t[k] += (-weight(b + 2) + weight(b + 3)) / kTempScale;
    }
    if (spec_.terminal_constraint) {
      const int b = 4 * n_;
      seed_soc[n_] += -weight(b) + weight(b + 1);
    }
    if (spec_.terminal_penalty)
      seed_soc[n_] += 2.0 * spec_.terminal_penalty->weight *
                      (r.states.back().soc - spec_.terminal_penalty->soc_ref);
    auto grad = adjoint_gradient(tr_, spec_, n_, u, r, seed_soc, seed_t);
    for (double& gi : grad) gi *= kControlScale;
    return grad;
  }

  double terminal_penalty(double soc_n) const {
    if (!spec_.terminal_penalty) return 0.0;
    const double d = soc_n - spec_.terminal_penalty->soc_ref;
    return spec_.terminal_penalty->weight * d * d;
  }

  double max_violation(const std::vector<double>& x) const {
    if (relax_) return 0.0;
    double v = 0.0;
    for (double gc : tr_.constraints(unscale(x))) v = std::max(v, gc);
    return v;
  }

  double complementarity(const std::vector<double>& x) const {
    if (relax_ || m_ == 0) return 0.0;
    const auto g = tr_.constraints(unscale(x));
    double c = 0.0;
    for (int i = 0; i < m_; ++i) c = std::max(c, lambda_[i] * std::max(0.0, -g[i]));
    return c;
  }

  double projected_gradient_norm(const std::vector<double>& x) const {
    const auto grad = merit_gradient(x);
    double n = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double step = std::clamp(x[i] - grad[i], xlo_[i], xhi_[i]) - x[i];
      n = std::max(n, std::abs(step));
    }
    return n;
  }

  void track_best(const std::vector<double>& x, double viol, double& best_obj,
                  std::vector<double>& best_x) const {
    if (viol <= tol_) {
      const double obj = tr_.objective(unscale(x));
      if (obj < best_obj) {
        best_obj = obj;
        best_x = x;
      }
    }
  }

  // Monotone projected BB descent on the current merit. Returns the total
  // merit decrease so the caller can tell a stalled pass from a moving one;
  // steps that shave off less than rounding noise do not count as progress.
  double inner_descent(std::vector<double>& x, double tol_pg, int max_steps, int outer,
                       NlpSolution& out) {
    const bool dbg = std::getenv("HEVSIM_NLP_DEBUG") != nullptr;
    double f = merit(x);
    const double f_start = f;
    auto grad = merit_gradient(x);
    if (dbg) {
      double worst = 0.0;
      int wi = -1;
      for (int i = 0; i < n_; ++i) {
        const double h = 1e-5;
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (merit(xp) - merit(xm)) / (2 * h);
        const double err = std::abs(fd - grad[i]) / std::max(1e-8, std::abs(fd));
        if (err > worst) {
          worst = err;
          wi = i;
        }
      }
      if (wi >= 0) {
        const double h = 1e-5;
        auto xp = x, xm = x;
        xp[wi] += h;
        xm[wi] -= h;
        const double fd = (merit(xp) - merit(xm)) / (2 * h);
        const auto obj = [&](const std::vector<double>& xx) {
          const auto r = tr_.rollout(unscale(xx));
          return r.objective + terminal_penalty(r.states.back().soc);
        };
        const double fd_obj = (obj(xp) - obj(xm)) / (2 * h);
        std::fprintf(stderr,
                     "  merit-grad FD worst rel=%.3e at i=%d fd=%.6e (obj part %.6e) g=%.6e "
                     "u=%.4f lo=%.1f hi=%.1f\n",
                     worst, wi, fd, fd_obj, grad[wi], x[wi] * kControlScale,
                     xlo_[wi] * kControlScale, xhi_[wi] * kControlScale);
      }
    }
    double step = 0.0;
    {
      double gmax = 0.0;
      for (double g : grad) gmax = std::max(gmax, std::abs(g));
      step = gmax > 1e-12 ? 0.1 / gmax : 1.0;
    }
    std::vector<double> xp(n_), d(n_);
    int tiny = 0;
    // The fuel map and the engine-heat term switch at P_eng = 0, so the merit
    // is only piecewise smooth and the regional gradient can point away from
    // a better adjacent piece; at an all-off tail it cannot see a heat pulse
    // at all. With an affine map the good solutions are pulsed, engine off or
    // near full load, and with flat cell maps the battery update does not
    // depend on soc, so with the multipliers held fixed the merit is nearly
    // separable per node. One Gauss-Seidel sweep with an exact per-node
    // search therefore recovers moves no gradient step can reach. Runs on
    // every stall, whatever detected it; returns false when the pass is done.
    const auto stall_repair = [&]() -> bool {
      const double f_before = f;
      for (int i = 0; i < n_; ++i) {
        const double ustar =
            spec_.horizon.nodes[i].power_demand + spec_.split.aux_power;
        const double ufull = ustar - spec_.split.engine.p_eng_max;
        double bu = x[i];
        double fb = f;
        const auto consider = [&](double c) {
          c = std::clamp(c, xlo_[i], xhi_[i]);
          if (c == x[i]) return;
          const double save = x[i];
          x[i] = c;
          const double fc = merit(x);
          x[i] = save;
          if (fc < fb - 1e-15) {
            fb = fc;
            bu = c;
          }
        };
        consider(ustar / kControlScale);
        consider((ustar - 200.0) / kControlScale);
        consider((ustar - 2000.0) / kControlScale);
        consider(ufull / kControlScale);
        consider(xlo_[i]);
        consider(xhi_[i]);
        for (int q = 1; q < 8; ++q)
          consider(xlo_[i] + (xhi_[i] - xlo_[i]) * q / 8.0);
        if (bu != x[i]) {
          x[i] = bu;
          f = fb;
        }
      }
      if (f_before - f <= 1e-15) return false;
      tiny = f_before - f < 1e-12 * (1.0 + std::abs(f)) ? tiny + 1 : 0;
      if (tiny >= 3) return false;
      grad = merit_gradient(x);
      double gmax = 0.0;
      for (double g : grad) gmax = std::max(gmax, std::abs(g));
      step = gmax > 1e-12 ? 0.1 / gmax : 1.0;
      ++total_accepted_;
      out.merit_history.emplace_back(outer, f);
      if (dbg) std::fprintf(stderr, "    sweep improved f=%.10e (was %.10e)\n", f, f_before);
      return true;
    };
    for (int it = 0; it < max_steps; ++it) {
      double dmax = 0.0;
      for (int i = 0; i < n_; ++i) {
        xp[i] = std::clamp(x[i] - step * grad[i], xlo_[i], xhi_[i]);
        d[i] = xp[i] - x[i];
        dmax = std::max(dmax, std::abs(d[i]));
      }
      if (dmax <= 1e-18) {
        if (stall_repair()) continue;
        break;
      }
      double gd = 0.0;
      for (int i = 0; i < n_; ++i) gd += grad[i] * d[i];
      if (gd > 0.0) {  // uphill projection arc: shrink the trial step
        step *= 0.25;
        continue;
      }
      double t = 1.0;
      double fn = 0.0;
      bool accepted = false;
      std::vector<double> xn(n_);
      int ls = 0;
      for (; ls < 40; ++ls) {
        for (int i = 0; i < n_; ++i) xn[i] = x[i] + t * d[i];
        fn = merit(xn);
        if (fn <= f + 1e-4 * t * gd) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (dbg)
        std::fprintf(stderr,
                     "    in %3d f=%.10e step=%.3e gd=%.3e dmax=%.3e ls=%d acc=%d fn=%.10e\n",
                     it, f, step, gd, dmax, ls, accepted ? 1 : 0, fn);
      if (!accepted) {
        if (stall_repair()) continue;
        break;
      }
      auto gn = merit_gradient(xn);
      double ss = 0.0, sy = 0.0;
      for (int i = 0; i < n_; ++i) {
        const double s = xn[i] - x[i];
        ss += s * s;
        sy += s * (gn[i] - grad[i]);
      }
      // When the curvature estimate degenerates, fall back to the step that the
      // line search actually accepted instead of growing blindly.
      step = sy > 1e-16 ? std::clamp(ss / sy, 1e-8, 1e6)
                        : std::clamp(step * t * 2.0, 1e-8, 1e6);
      tiny = f - fn < 1e-12 * (1.0 + std::abs(f)) ? tiny + 1 : 0;
      x = xn;
      f = fn;
      grad = std::move(gn);
      ++total_accepted_;
      out.merit_history.emplace_back(outer, f);
      if (tiny >= 3) {
        if (stall_repair()) continue;
        break;
      }

      double pg = 0.0;
      for (int i = 0; i < n_; ++i)
        pg = std::max(pg, std::abs(std::clamp(x[i] - grad[i], xlo_[i], xhi_[i]) - x[i]));
      if (pg <= tol_pg) {
        if (stall_repair()) continue;
        break;
      }
    }
    return f_start - f;
  }

  // Pure feasibility phase: minimize the squared violation from the current
  // point; used when the multiplier loop stalls infeasible.
  void restoration(std::vector<double>& x, NlpSolution& out) {
    const auto viol2 = [&](const std::vector<double>& xx) {
      double s = 0.0;
      for (double gc : tr_.constraints(unscale(xx))) {
        const double p = std::max(0.0, gc);
        s += p * p;
      }
      return s;
    };
    // gradient by the same adjoint with hinge weights
    const auto vgrad = [&](const std::vector<double>& xx) {
      const auto u = unscale(xx);
      const auto r = tr_.rollout(u);
      const auto g = tr_.constraints(u);
      std::vector<double> seed_soc(n_ + 1, 0.0), seed_t(n_ + 1, 0.0);
      const auto w = [&](int c) { return 2.0 * std::max(0.0, g[c]); };
      for (int k = 1; k <= n_; ++k) {
        const int b = 4 * (k - 1);
        seed_soc[k] += -w(b) + w(b + 1);
        seed_t[k] += (-w(b + 2) + w(b + 3)) / kTempScale;
      }
      if (spec_.terminal_constraint) {
        const int b = 4 * n_;
        seed_soc[n_] += -w(b) + w(b + 1);
      }
      // suppress the stage-cost term: subtract the pure objective gradient
      auto full = adjoint_gradient(tr_, spec_, n_, u, r, seed_soc, seed_t);
      auto obj = adjoint_gradient(tr_, spec_, n_, u, r, {}, {});
      for (int i = 0; i < n_; ++i) full[i] = (full[i] - obj[i]) * kControlScale;
      return full;
    };

    double f = viol2(x);
    auto grad = vgrad(x);
    double step = 1.0;
    std::vector<double> xn(n_);
    for (int it = 0; it < 200 && f > tol_ * tol_; ++it) {
      double gd = 0.0;
      for (int i = 0; i < n_; ++i) {
        xn[i] = std::clamp(x[i] - step * grad[i], xlo_[i], xhi_[i]);
        gd += grad[i] * (xn[i] - x[i]);
      }
      const double fn = viol2(xn);
      if (fn <= f + 1e-4 * gd) {
        double ss = 0.0, sy = 0.0;
        auto gn = vgrad(xn);
        for (int i = 0; i < n_; ++i) {
          const double s = xn[i] - x[i];
          ss += s * s;
          sy += s * (gn[i] - grad[i]);
        }
        x = xn;
        f = fn;
        grad = std::move(gn);
        step = sy > 1e-16 ? std::clamp(ss / sy, 1e-8, 1e6) : step * 2.0;
        ++total_accepted_;
        out.merit_history.emplace_back(-1, f);
      } else {
        step *= 0.5;
        if (step < 1e-14) break;
      }
    }
  }

  const Transcription& tr_;
  const OcpSpec& spec_;
  int n_ = 0;
  int m_ = 0;
  double tol_;
  int max_outer_;
  bool relax_;
  std::vector<double> xlo_, xhi_, lambda_;
  double rho_ = 10.0;
  int total_accepted_ = 0;
};

NlpSolution solve(const Transcription& nlp, const std::optional<std::vector<double>>& warm_start,
                  double tol, int max_iter, bool relax_with_slack) {
  AugmentedLagrangianSolver solver(nlp, tol, max_iter, relax_with_slack);
  return solver.run(warm_start);
}

}  // namespace hevsim
