#include "hevsim/dp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace hevsim {
namespace {

constexpr double kExcluded = 1e30;

struct AxisHit {
  int i0, i1;
  double w1;  // weight of i1
};

AxisHit locate(const std::vector<double>& axis, double x) {
  const int n = static_cast<int>(axis.size());
  if (n == 1 || x <= axis.front()) return {0, 0, 0.0};
  if (x >= axis.back()) return {n - 1, n - 1, 0.0};
  const double h = (axis.back() - axis.front()) / (n - 1);
  int i0 = std::min(static_cast<int>((x - axis.front()) / h), n - 2);
  if (x < axis[i0]) --i0;  // guard against float rounding at cell edges
  if (x >= axis[i0 + 1] && i0 + 2 < n) ++i0;
  const double w1 = std::clamp((x - axis[i0]) / (axis[i0 + 1] - axis[i0]), 0.0, 1.0);
  return {i0, i0 + 1, w1};
}

void interp_slice(const DpGrid& g, const double* fuel, const double* weight, double soc,
                  double t_cl, double& f_out, double& w_out) {
  const AxisHit a = locate(g.soc_points, soc);
  const AxisHit b = locate(g.t_cl_points, t_cl);
  const int nt = static_cast<int>(g.t_cl_points.size());
  const double w00 = (1 - a.w1) * (1 - b.w1), w01 = (1 - a.w1) * b.w1;
  const double w10 = a.w1 * (1 - b.w1), w11 = a.w1 * b.w1;
  const auto at = [nt](const double* arr, int i, int j) { return arr[i * nt + j]; };
  f_out = w00 * at(fuel, a.i0, b.i0) + w01 * at(fuel, a.i0, b.i1) +
          w10 * at(fuel, a.i1, b.i0) + w11 * at(fuel, a.i1, b.i1);
  w_out = w00 * at(weight, a.i0, b.i0) + w01 * at(weight, a.i0, b.i1) +
          w10 * at(weight, a.i1, b.i0) + w11 * at(weight, a.i1, b.i1);
}

// Candidates: the control grid clipped into the node's feasible interval plus
// the two boundary-exact commands (battery idle and engine off), smallest
// magnitude first so strict improvement breaks ties toward small |p_bat|.
void build_candidates(double demand, double soc, const SplitParams& sp,
                      const std::vector<double>& control_points, std::vector<double>& out) {
  const InputBounds b = input_bounds(demand, soc, sp);
  out.clear();
  for (double c : control_points) out.push_back(std::clamp(c, b.lo, b.hi));
  out.push_back(std::clamp(0.0, b.lo, b.hi));
  out.push_back(std::clamp(demand + sp.aux_power, b.lo, b.hi));
  std::sort(out.begin(), out.end(), [](double a, double c) {
    return std::abs(a) != std::abs(c) ? std::abs(a) < std::abs(c) : a < c;
  });
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

struct CellBest {
  double fuel = 0.0;
  double weight = 1.0;
  double control = 0.0;
  double combined = kExcluded;
};

// One Bellman evaluation against the next slice (fuel_next/weight_next are
// nsoc x ntcl). Shared verbatim by the sweep and the residual audit.
CellBest dp_cell(const DpGrid& grid, const DpParams& p, double demand, double speed,
                 double soc, double t_cl, const double* fuel_next, const double* weight_next,
                 std::vector<double>& cand) {
  build_candidates(demand, soc, p.split, grid.control_points, cand);
  CellBest best;
  for (double u : cand) {
    const double pe = engine_power_for(demand, u, p.split);
    const double fr = corrected_fuel_rate(pe, t_cl, p.split.engine, p.alpha);
    const double soc2 = soc + grid.dt * soc_derivative(soc, u, p.split.battery);
    const double t2 = t_cl + grid.dt * coolant_derivative(t_cl, fr, pe, speed, p.thermal);
    if (soc2 < p.bounds.soc_min || soc2 > p.bounds.soc_max || t2 < p.bounds.t_cl_min ||
        t2 > p.bounds.t_cl_max)
      continue;
    double f_next, w_next;
    interp_slice(grid, fuel_next, weight_next, soc2, t2, f_next, w_next);
    const double c = fr * grid.dt + f_next + kDpDeadSentinel * w_next;
    if (c < best.combined) {
      best.combined = c;
      best.fuel = fr * grid.dt + f_next;
      best.weight = w_next;
      best.control = u;
    }
  }
  return best;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<double> DpGrid::linspace(double a, double b, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  v.front() = a;
  v.back() = b;
  return v;
}

DpGrid DpGrid::defaults(const StateBounds& bounds, const BatteryParams& battery) {
  DpGrid g;
  g.soc_points = linspace(bounds.soc_min, bounds.soc_max, 81);
  g.t_cl_points = linspace(bounds.t_cl_min, bounds.t_cl_max, 26);
  g.control_points = linspace(battery.p_bat_min, battery.p_bat_max, 41);
  g.dt = 1.0;
  return g;
}

void DpPolicy::interp(int t, double soc, double t_cl, double& fuel, double& weight) const {
  interp_slice(grid, &fuel_to_go[idx(t, 0, 0)], &dead_weight[idx(t, 0, 0)], soc, t_cl, fuel,
               weight);
}

double DpPolicy::value_interp(int t, double soc, double t_cl) const {
  double f, w;
  interp(t, soc, t_cl, f, w);
  return f + kDpDeadSentinel * w;
}

DpPolicy solve_dp(const DriveCycle& cycle, const DpGrid& grid, const DpParams& params) {
  const int T = cycle.duration();
  const int ns = static_cast<int>(grid.soc_points.size());
  const int nt = static_cast<int>(grid.t_cl_points.size());
  if (T < 1 || ns < 1 || nt < 1 || grid.control_points.empty())
    throw ValidationError("dp needs a nonempty cycle and grid");

  const std::vector<double> demand = demand_profile(cycle.speeds, grid.dt, params.road);

  DpPolicy pol;
  pol.grid = grid;
  pol.n_steps = T;
  pol.terminal_band = params.terminal_band;
  pol.soc_init = params.initial.soc;
  pol.fuel_to_go.assign(static_cast<std::size_t>(T + 1) * ns * nt, 0.0);
  pol.dead_weight.assign(static_cast<std::size_t>(T + 1) * ns * nt, 0.0);
  pol.best_control.assign(static_cast<std::size_t>(T) * ns * nt, 0.0);

  const double band = params.terminal_band * params.initial.soc;
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nt; ++j)
      pol.dead_weight[pol.idx(T, i, j)] =
          std::abs(grid.soc_points[i] - params.initial.soc) <= band ? 0.0 : 1.0;

  std::vector<double> cand;
  for (int t = T - 1; t >= 0; --t) {
    const double* fn = &pol.fuel_to_go[pol.idx(t + 1, 0, 0)];
    const double* wn = &pol.dead_weight[pol.idx(t + 1, 0, 0)];
    for (int i = 0; i < ns; ++i) {
      for (int j = 0; j < nt; ++j) {
        const CellBest b = dp_cell(grid, params, demand[t], cycle.speeds[t],
                                   grid.soc_points[i], grid.t_cl_points[j], fn, wn, cand);
        const std::size_t k = pol.idx(t, i, j);
        if (b.combined >= kExcluded) {
          pol.fuel_to_go[k] = 0.0;
          pol.dead_weight[k] = 1.0;
          pol.best_control[k] = 0.0;
        } else {
          pol.fuel_to_go[k] = b.fuel;
          pol.dead_weight[k] = b.weight;
          pol.best_control[k] = b.control;
        }
      }
    }
  }

  if (pol.value_interp(0, params.initial.soc, params.initial.t_cl) >= kDpNoPolicy)
    throw NoFeasiblePolicy("initial state cannot reach the terminal SOC band");
  return pol;
}

DpTrajectory rollout_policy(const DpPolicy& policy, const DriveCycle& cycle,
                            const PlantState& initial, const DpParams& params) {
  const int T = std::min(policy.n_steps, cycle.duration());
  const std::vector<double> demand = demand_profile(cycle.speeds, policy.grid.dt, params.road);

  DpTrajectory traj;
  traj.soc.push_back(initial.soc);
  traj.t_cl.push_back(initial.t_cl);
  PlantState st = initial;
  std::vector<double> cand;

  for (int t = 0; t < T; ++t) {
    build_candidates(demand[t], st.soc, params.split, policy.grid.control_points, cand);
    const double* fn = &policy.fuel_to_go[policy.idx(t + 1, 0, 0)];
    const double* wn = &policy.dead_weight[policy.idx(t + 1, 0, 0)];

    double best_u = 0.0, best_c = kExcluded;
    bool found = false;
    for (double u : cand) {
      const double pe = engine_power_for(demand[t], u, params.split);
      const double fr = corrected_fuel_rate(pe, st.t_cl, params.split.engine, params.alpha);
      const double soc2 = st.soc + policy.grid.dt * soc_derivative(st.soc, u, params.split.battery);
      const double t2 =
          st.t_cl + policy.grid.dt * coolant_derivative(st.t_cl, fr, pe, cycle.speeds[t],
                                                        params.thermal);
      if (soc2 < params.bounds.soc_min || soc2 > params.bounds.soc_max ||
          t2 < params.bounds.t_cl_min || t2 > params.bounds.t_cl_max)
        continue;
      double f_next, w_next;
      interp_slice(policy.grid, fn, wn, soc2, t2, f_next, w_next);
      if (w_next >= 0.5) continue;  // landing mostly dead: reject
      const double c = fr * policy.grid.dt + f_next + kDpDeadSentinel * w_next;
      if (c < best_c) {
        best_c = c;
        best_u = u;
        found = true;
      }
    }
    if (!found) {
      // Saturating fallback: least dead landing, ignoring the box (clamped by
      // the plant); only reachable when the policy itself is near-dead here.
      double best_w = 2.0;
      for (double u : cand) {
        const double pe = engine_power_for(demand[t], u, params.split);
        const double fr = corrected_fuel_rate(pe, st.t_cl, params.split.engine, params.alpha);
        const double soc2 =
            st.soc + policy.grid.dt * soc_derivative(st.soc, u, params.split.battery);
        const double t2 = st.t_cl + policy.grid.dt * coolant_derivative(st.t_cl, fr, pe,
                                                                        cycle.speeds[t],
                                                                        params.thermal);
        double f_next, w_next;
        interp_slice(policy.grid, fn, wn, std::clamp(soc2, params.bounds.soc_min,
                                                     params.bounds.soc_max),
                     std::clamp(t2, params.bounds.t_cl_min, params.bounds.t_cl_max), f_next,
                     w_next);
        if (w_next < best_w) {
          best_w = w_next;
          best_u = u;
        }
      }
    }

    const double pe = engine_power_for(demand[t], best_u, params.split);
    const double fr = corrected_fuel_rate(pe, st.t_cl, params.split.engine, params.alpha);
    st = step(st, {best_u, pe, fr, cycle.speeds[t]}, policy.grid.dt, params.split.battery,
              params.thermal)
             .state;
    traj.p_bat.push_back(best_u);
    traj.p_eng.push_back(pe);
    traj.fuel_rate.push_back(fr);
    traj.soc.push_back(st.soc);
    traj.t_cl.push_back(st.t_cl);
    traj.total_fuel += fr * policy.grid.dt;
  }
  return traj;
}

double bellman_residual_audit(const DpPolicy& policy, const DriveCycle& cycle,
                              const DpParams& params, int samples, std::uint64_t seed) {
  const std::vector<double> demand = demand_profile(cycle.speeds, policy.grid.dt, params.road);
  const int ns = policy.nsoc(), nt = policy.ntcl();
  std::vector<double> cand;
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const std::uint64_t r = mix64(seed + s);
    const int t = static_cast<int>(r % policy.n_steps);
    const int i = static_cast<int>((r >> 20) % ns);
    const int j = static_cast<int>((r >> 40) % nt);
    const CellBest b = dp_cell(policy.grid, params, demand[t], cycle.speeds[t],
                               policy.grid.soc_points[i], policy.grid.t_cl_points[j],
                               &policy.fuel_to_go[policy.idx(t + 1, 0, 0)],
                               &policy.dead_weight[policy.idx(t + 1, 0, 0)], cand);
    const double stored = policy.value(t, i, j);
    const double recomputed =
        b.combined >= kExcluded ? kDpDeadSentinel : b.fuel + kDpDeadSentinel * b.weight;
    worst = std::max(worst, std::abs(stored - recomputed));
  }
  return worst;
}

namespace {

void put_u64(std::ofstream& f, std::uint64_t v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ofstream& f, double v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_vec(std::ofstream& f, const std::vector<double>& v) {
  f.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
}

}  // namespace

void save_policy(const DpPolicy& policy, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write policy file: " + path);
  f.write("HEVDPOL1", 8);
  put_u64(f, static_cast<std::uint64_t>(policy.n_steps));
  put_u64(f, policy.grid.soc_points.size());
  put_u64(f, policy.grid.t_cl_points.size());
  put_u64(f, policy.grid.control_points.size());
  put_f64(f, policy.grid.dt);
  put_f64(f, policy.terminal_band);
  put_f64(f, policy.soc_init);
  put_vec(f, policy.grid.soc_points);
  put_vec(f, policy.grid.t_cl_points);
  put_vec(f, policy.grid.control_points);
  put_vec(f, policy.fuel_to_go);
  put_vec(f, policy.dead_weight);
  put_vec(f, policy.best_control);
  if (!f) throw ConfigError("short write on policy file: " + path);
}

DpPolicy load_policy(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read policy file: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "HEVDPOL1", 8) != 0)
    throw ParseError(path + ": not a policy cache file");
  std::uint64_t n_steps, ns, nt, nc;
  const auto get_u64 = [&](std::uint64_t& v) { f.read(reinterpret_cast<char*>(&v), sizeof v); };
  const auto get_f64 = [&](double& v) { f.read(reinterpret_cast<char*>(&v), sizeof v); };
  get_u64(n_steps);
  get_u64(ns);
  get_u64(nt);
  get_u64(nc);
  DpPolicy pol;
  pol.n_steps = static_cast<int>(n_steps);
  get_f64(pol.grid.dt);
  get_f64(pol.terminal_band);
  get_f64(pol.soc_init);
  const auto get_vec = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  };
  get_vec(pol.grid.soc_points, ns);
  get_vec(pol.grid.t_cl_points, nt);
  get_vec(pol.grid.control_points, nc);
  get_vec(pol.fuel_to_go, (n_steps + 1) * ns * nt);
  get_vec(pol.dead_weight, (n_steps + 1) * ns * nt);
  get_vec(pol.best_control, n_steps * ns * nt);
  if (!f) throw ParseError(path + ": truncated policy cache file");
  return pol;
}

}  // namespace hevsim
