#include "hevsim/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"

namespace hevsim {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double num(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw ConfigError(std::string("config key '") + key + "' must be a number");
  return j[key].get<double>();
}

PiecewiseLinear table_from_json(const json& j, const char* what) {
  std::vector<double> xs, ys;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != 2)
      throw ConfigError(std::string(what) + " table rows must be [x, y] pairs");
    xs.push_back(row[0].get<double>());
    ys.push_back(row[1].get<double>());
  }
  return PiecewiseLinear(xs, ys);
}

}  // namespace

void ExperimentConfig::apply_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (j.contains("cycle")) cycle_path = j["cycle"].get<std::string>();
  if (j.contains("controller")) controller = j["controller"].get<std::string>();
  if (controller != "rule" && controller != "baseline-mpc" && controller != "mh-mpc" &&
      controller != "dp")
    throw ConfigError("unknown controller: " + controller);
  if (j.contains("out_dir")) out_dir = j["out_dir"].get<std::string>();
  if (j.contains("label")) label = j["label"].get<std::string>();
  if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
  soc_init = num(j, "soc_init", soc_init);
  t_cl_init = num(j, "t_cl_init", t_cl_init);
  if (j.contains("aux_power")) split.aux_power = j["aux_power"].get<double>();

  if (j.contains("preview")) {
    const auto& p = j["preview"];
    preview_model.accurate_window = static_cast<int>(num(p, "accurate_window", 20));
    preview_model.coarse_step = static_cast<int>(num(p, "coarse_step", 20));
    preview_model.noise_std = num(p, "noise_std", preview_model.noise_std);
  }
  if (j.contains("rule")) {
    const auto& r = j["rule"];
    rule.engine_on_power = num(r, "engine_on_power", rule.engine_on_power);
    rule.soc_low = num(r, "soc_low", rule.soc_low);
    rule.soc_high = num(r, "soc_high", rule.soc_high);
    rule.t_cl_floor = num(r, "t_cl_floor", rule.t_cl_floor);
    rule.charge_power = num(r, "charge_power", rule.charge_power);
  }
  baseline.soc_ref = soc_init;
  mh.soc_init = soc_init;
  if (j.contains("baseline")) {
    const auto& b = j["baseline"];
    baseline.horizon_steps = static_cast<int>(num(b, "horizon_steps", baseline.horizon_steps));
    baseline.lambda = num(b, "lambda", baseline.lambda);
    baseline.soc_ref = num(b, "soc_ref", baseline.soc_ref);
  }
  if (j.contains("mh")) {
    const auto& m = j["mh"];
    mh.n = static_cast<int>(num(m, "n", mh.n));
    mh.dt1 = num(m, "dt1", mh.dt1);
    mh.dt2 = num(m, "dt2", mh.dt2);
    mh.terminal_band = num(m, "terminal_band", mh.terminal_band);
    mh.soc_init = num(m, "soc_init", mh.soc_init);
  }
  if (j.contains("solver")) {
    solver_tol = num(j["solver"], "tol", solver_tol);
    solver_max_iter = static_cast<int>(num(j["solver"], "max_iter", solver_max_iter));
  }
  if (j.contains("battery")) {
    const auto& b = j["battery"];
    if (b.contains("capacity_ah"))
      split.battery.capacity_coulombs = b["capacity_ah"].get<double>() * 3600.0;
    if (b.contains("u_oc"))
      split.battery.open_circuit_voltage = PiecewiseLinear::constant(b["u_oc"].get<double>());
    if (b.contains("u_oc_table"))
      split.battery.open_circuit_voltage = table_from_json(b["u_oc_table"], "u_oc");
    if (b.contains("r_int"))
      split.battery.internal_resistance = PiecewiseLinear::constant(b["r_int"].get<double>());
    if (b.contains("r_int_table"))
      split.battery.internal_resistance = table_from_json(b["r_int_table"], "r_int");
    split.battery.p_bat_min = num(b, "p_min", split.battery.p_bat_min);
    split.battery.p_bat_max = num(b, "p_max", split.battery.p_bat_max);
  }
  if (j.contains("engine")) {
    const auto& e = j["engine"];
    split.engine.p_eng_max = num(e, "p_eng_max", split.engine.p_eng_max);
    split.engine.idle_fuel_rate = num(e, "idle_fuel_rate", split.engine.idle_fuel_rate);
    split.engine.willans_slope = num(e, "willans_slope", split.engine.willans_slope);
    if (e.contains("ool_file")) ool_from_file(e["ool_file"].get<std::string>(), split.engine);
  }
  if (j.contains("alpha")) {
    const auto& a = j["alpha"];
    if (a.contains("file")) {
      alpha = alpha_from_file(a["file"].get<std::string>());
    } else if (a.contains("table")) {
      alpha.curve = table_from_json(a["table"], "alpha");
      alpha.warm_temp = num(a, "warm", alpha.curve.xs().back());
    }
  }
  if (j.contains("thermal")) {
    const auto& t = j["thermal"];
    thermal.thermal_mass = num(t, "thermal_mass", thermal.thermal_mass);
    thermal.fuel_lhv = num(t, "fuel_lhv", thermal.fuel_lhv);
    thermal.exhaust_fraction = num(t, "exhaust_fraction", thermal.exhaust_fraction);
    thermal.h0 = num(t, "h0", thermal.h0);
    thermal.h1 = num(t, "h1", thermal.h1);
    thermal.t_amb = num(t, "t_amb", thermal.t_amb);
    thermal.q_heat = num(t, "heating_demand", num(t, "q_heat", thermal.q_heat));
  }
  if (j.contains("road")) {
    const auto& r = j["road"];
    road.mass = num(r, "mass", road.mass);
    road.rolling_coeff = num(r, "rolling_coeff", road.rolling_coeff);
    road.drag_area = num(r, "drag_area", road.drag_area);
    road.air_density = num(r, "air_density", road.air_density);
    road.driveline_eff = num(r, "driveline_eff", road.driveline_eff);
    road.regen_cap = num(r, "regen_cap", road.regen_cap);
  }
  if (j.contains("bounds")) {
    const auto& b = j["bounds"];
    bounds.soc_min = num(b, "soc_min", bounds.soc_min);
    bounds.soc_max = num(b, "soc_max", bounds.soc_max);
    bounds.t_cl_min = num(b, "t_cl_min", bounds.t_cl_min);
    bounds.t_cl_max = num(b, "t_cl_max", bounds.t_cl_max);
  }
  if (j.contains("dp")) {
    const auto& d = j["dp"];
    dp_soc_points = static_cast<int>(num(d, "soc_points", dp_soc_points));
    dp_t_cl_points = static_cast<int>(num(d, "t_cl_points", dp_t_cl_points));
    dp_control_points = static_cast<int>(num(d, "control_points", dp_control_points));
    dp_terminal_band = num(d, "terminal_band", dp_terminal_band);
    if (d.contains("policy_cache")) dp_policy_cache = d["policy_cache"].get<std::string>();
  }
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  ExperimentConfig cfg;
  cfg.apply_json_text(buf.str());
  return cfg;
}

namespace {

bool policy_matches(const DpPolicy& pol, const DpGrid& grid, int t, double soc_init,
                    double band) {
  return pol.n_steps == t && pol.grid.soc_points.size() == grid.soc_points.size() &&
         pol.grid.t_cl_points.size() == grid.t_cl_points.size() &&
         pol.grid.control_points.size() == grid.control_points.size() &&
         pol.grid.dt == grid.dt && pol.soc_init == soc_init && pol.terminal_band == band &&
         pol.grid.soc_points.front() == grid.soc_points.front() &&
         pol.grid.soc_points.back() == grid.soc_points.back() &&
         pol.grid.control_points.front() == grid.control_points.front() &&
         pol.grid.control_points.back() == grid.control_points.back();
}

}  // namespace

RunReport run(const ExperimentConfig& cfg) {
  if (cfg.cycle_path.empty()) throw ConfigError("config needs a cycle path");
  if (cfg.t_cl_init < cfg.bounds.t_cl_min || cfg.t_cl_init > cfg.bounds.t_cl_max)
    throw ConfigError("t_cl_init outside the temperature box");
  const LoadResult lr = load_cycle(cfg.cycle_path);
  const DriveCycle& cy = lr.cycle;
  const int T = cy.duration();
  const std::vector<double> demand = demand_profile(cy.speeds, 1.0, cfg.road);

  ControllerContext ctx{cfg.split, cfg.thermal, cfg.alpha,
                        cfg.bounds, cfg.road,    cfg.solver_tol, cfg.solver_max_iter};

  std::unique_ptr<RuleBased> rule;
  std::unique_ptr<BaselineMpc> baseline;
  std::unique_ptr<MhMpc> mh;
  std::vector<double> dp_controls;
  PreviewModel pm = cfg.preview_model;
  pm.seed = cfg.seed;

  if (cfg.controller == "rule") {
    rule = std::make_unique<RuleBased>(cfg.rule, cfg.split, cfg.bounds);
  } else if (cfg.controller == "baseline-mpc") {
    BaselineMpcConfig bc = cfg.baseline;
    baseline = std::make_unique<BaselineMpc>(bc, ctx, cfg.rule);
    pm.accurate_window = std::max(pm.accurate_window, bc.horizon_steps);
  } else if (cfg.controller == "mh-mpc") {
    MhMpcConfig mc = cfg.mh;
    mh = std::make_unique<MhMpc>(mc, ctx, cfg.rule);
    pm.accurate_window = static_cast<int>(std::lround(mc.n * mc.dt1));
    pm.coarse_step = static_cast<int>(std::lround(mc.dt2));
  } else if (cfg.controller == "dp") {
    DpGrid grid;
    grid.soc_points = DpGrid::linspace(cfg.bounds.soc_min, cfg.bounds.soc_max, cfg.dp_soc_points);
    grid.t_cl_points =
        DpGrid::linspace(cfg.bounds.t_cl_min, cfg.bounds.t_cl_max, cfg.dp_t_cl_points);
    grid.control_points = DpGrid::linspace(cfg.split.battery.p_bat_min,
                                           cfg.split.battery.p_bat_max, cfg.dp_control_points);
    DpParams dparams{{cfg.soc_init, cfg.t_cl_init}, cfg.dp_terminal_band, cfg.split,
                     cfg.thermal,  cfg.alpha,       cfg.bounds,          cfg.road};
    std::unique_ptr<DpPolicy> pol;
    if (!cfg.dp_policy_cache.empty() && std::filesystem::exists(cfg.dp_policy_cache)) {
      auto loaded = load_policy(cfg.dp_policy_cache);
      if (policy_matches(loaded, grid, T, cfg.soc_init, cfg.dp_terminal_band))
        pol = std::make_unique<DpPolicy>(std::move(loaded));
    }
    if (!pol) {
      pol = std::make_unique<DpPolicy>(solve_dp(cy, grid, dparams));
      if (!cfg.dp_policy_cache.empty()) save_policy(*pol, cfg.dp_policy_cache);
    }
    dp_controls = rollout_policy(*pol, cy, dparams.initial, dparams).p_bat;
  } else {
    throw ConfigError("unknown controller: " + cfg.controller);
  }

  RunReport rep;
  rep.label = cfg.label.empty() ? cfg.controller : cfg.label;
  rep.cycle = cy.name;
  rep.soc_min = cfg.soc_init;
  rep.soc_max = cfg.soc_init;
  rep.t_cl_min_after_first = std::numeric_limits<double>::infinity();

  std::filesystem::create_directories(cfg.out_dir);
  rep.trajectory_path = cfg.out_dir + "/" + rep.label + "_" + cy.name + ".csv";
  std::ofstream csv(rep.trajectory_path);
  if (!csv) throw ConfigError("cannot write trajectory file: " + rep.trajectory_path);
  csv << "t,v,P_d,p_bat,p_eng,fuel_rate,soc,t_cl,solve_time,status\n";

  PlantState st{cfg.soc_init, cfg.t_cl_init};
  std::vector<double> walls;
  walls.reserve(T);

  for (int t = 0; t < T; ++t) {
    double u = 0.0;
    int iters = 0;
    std::string status = "ok";
    double wall = 0.0;

    if (rule) {
      u = rule->step(st, demand[t]);
    } else if (dp_controls.size()) {
      u = dp_controls[t];
      status = "dp";
    } else {
      const auto t0 = std::chrono::steady_clock::now();
      MpcStep ms;
      if (baseline) {
        ms = baseline->step(st, t, preview(cy, t, pm), T);
      } else {
        const Preview pv = preview(cy, t, pm);
        ms = mh->step(st, t, pv.fine, pv.coarse, T);
      }
      wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      u = ms.p_bat;
      iters = ms.solution.iterations;
      status = ms.fell_back ? "fallback" : to_string(ms.solution.status);
      if (ms.solution.relaxed && !ms.fell_back) {
        status = "relaxed";
        ++rep.relaxed_steps;
        rep.slack_total += ms.solution.slack_total;
      }
      if (ms.fell_back) ++rep.fallback_steps;
      walls.push_back(wall);
    }

    // Power-split accounting: engine covers demand plus accessories net of the
    // battery, clamped to its range. Checked against the map layer each step.
    const double pe = engine_power_for(demand[t], u, cfg.split);
    const double expected =
        std::clamp(demand[t] + cfg.split.aux_power - u, 0.0, cfg.split.engine.p_eng_max);
    if (std::abs(pe - expected) > 1e-9 || pe < 0.0 || pe > cfg.split.engine.p_eng_max)
      throw Error("power-split accounting violated in the loop");
    const double fr = corrected_fuel_rate(pe, st.t_cl, cfg.split.engine, cfg.alpha);

    csv << t << ',' << fmt(cy.speeds[t]) << ',' << fmt(demand[t]) << ',' << fmt(u) << ','
        << fmt(pe) << ',' << fmt(fr) << ',' << fmt(st.soc) << ',' << fmt(st.t_cl) << ','
        << iters << ',' << status << '\n';

    st = step(st, {u, pe, fr, cy.speeds[t]}, 1.0, cfg.split.battery, cfg.thermal).state;
    rep.total_fuel += fr * 1.0;
    rep.soc_min = std::min(rep.soc_min, st.soc);
    rep.soc_max = std::max(rep.soc_max, st.soc);
    rep.t_cl_min_after_first = std::min(rep.t_cl_min_after_first, st.t_cl);
    rep.soc_violation += std::max(0.0, cfg.bounds.soc_min - st.soc) +
                         std::max(0.0, st.soc - cfg.bounds.soc_max);
    rep.t_cl_violation += std::max(0.0, cfg.bounds.t_cl_min - st.t_cl) +
                          std::max(0.0, st.t_cl - cfg.bounds.t_cl_max);
  }
  csv.close();

  rep.terminal_soc = st.soc;
  rep.terminal_soc_error = st.soc - cfg.soc_init;
  rep.terminal_t_cl = st.t_cl;
  if (!walls.empty()) {
    rep.solve_min = *std::min_element(walls.begin(), walls.end());
    rep.solve_max = *std::max_element(walls.begin(), walls.end());
    double s = 0.0;
    for (double w : walls) s += w;
    rep.solve_mean = s / walls.size();
  }

  std::ofstream js(cfg.out_dir + "/" + rep.label + "_" + cy.name + "_summary.json");
  js << rep.to_json() << '\n';
  return rep;
}

std::string RunReport::to_json() const {
  json j;
  j["label"] = label;
  j["cycle"] = cycle;
  j["total_fuel_kg"] = total_fuel;
  j["terminal_soc"] = terminal_soc;
  j["terminal_soc_error"] = terminal_soc_error;
  j["terminal_t_cl"] = terminal_t_cl;
  j["soc_violation_integral"] = soc_violation;
  j["t_cl_violation_integral"] = t_cl_violation;
  j["soc_min"] = soc_min;
  j["soc_max"] = soc_max;
  j["t_cl_min_after_first"] = t_cl_min_after_first;
  j["solve_time_s"] = {{"min", solve_min}, {"mean", solve_mean}, {"max", solve_max}};
  j["slack_total"] = slack_total;
  j["relaxed_steps"] = relaxed_steps;
  j["fallback_steps"] = fallback_steps;
  j["trajectory"] = trajectory_path;
  return j.dump(2);
}

std::vector<TrajectoryRow> read_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trajectory file: " + path);
  std::vector<TrajectoryRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TrajectoryRow r;
    std::istringstream ls(line);
    std::string tok;
    double* fields[] = {&r.t,   &r.v,   &r.p_d, &r.p_bat,    &r.p_eng,
                        &r.fuel_rate, &r.soc, &r.t_cl, &r.solve_time};
    for (double* f : fields) {
      if (!std::getline(ls, tok, ',')) throw ParseError(path + ": short trajectory row");
      *f = std::stod(tok);
    }
    if (!std::getline(ls, r.status)) throw ParseError(path + ": missing status column");
    rows.push_back(std::move(r));
  }
  return rows;
}

AuditResult audit_trajectory(const std::vector<TrajectoryRow>& rows, const RunReport& report,
                             const ExperimentConfig& cfg) {
  AuditResult a;
  double fuel = 0.0;
  PlantState st{rows.empty() ? cfg.soc_init : rows.front().soc,
                rows.empty() ? cfg.t_cl_init : rows.front().t_cl};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    a.soc_residual = std::max(a.soc_residual, std::abs(r.soc - st.soc));
    a.t_cl_residual = std::max(a.t_cl_residual, std::abs(r.t_cl - st.t_cl));
    st = step({r.soc, r.t_cl}, {r.p_bat, r.p_eng, r.fuel_rate, r.v}, 1.0, cfg.split.battery,
              cfg.thermal)
             .state;
    fuel += r.fuel_rate * 1.0;
  }
  a.soc_residual = std::max(a.soc_residual, std::abs(report.terminal_soc - st.soc));
  a.t_cl_residual = std::max(a.t_cl_residual, std::abs(report.terminal_t_cl - st.t_cl));
  a.fuel_mismatch = std::abs(fuel - report.total_fuel);
  return a;
}

Comparison compare(const std::vector<RunReport>& reports, const std::string& reference_label) {
  const RunReport* ref = nullptr;
  for (const auto& r : reports)
    if (r.label == reference_label) ref = &r;
  if (!ref) throw ConfigError("reference label not found: " + reference_label);
  for (const auto& r : reports)
    if (r.cycle != ref->cycle)
      throw ConfigError("compare needs reports from the same cycle");

  Comparison c;
  c.reference_label = reference_label;
  for (const auto& r : reports) {
    const double saving = 100.0 * (ref->total_fuel - r.total_fuel) /
                          (ref->total_fuel > 0.0 ? ref->total_fuel : 1.0);
    c.rows.push_back({r.label, r.total_fuel, saving, r.terminal_soc_error, r.solve_mean});
  }
  return c;
}

std::string Comparison::to_csv() const {
  std::ostringstream out;
  out << "label,total_fuel_kg,saving_vs_" << reference_label << "_pct,terminal_soc_error,"
      << "solve_mean_s\n";
  for (const auto& r : rows)
    out << r.label << ',' << fmt(r.total_fuel) << ',' << fmt(r.saving_pct) << ','
        << fmt(r.terminal_soc_error) << ',' << fmt(r.solve_mean) << '\n';
  return out.str();
}

std::string Comparison::to_text() const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %12s %10s %12s %12s\n", "controller", "fuel [kg]",
                "saving", "d soc", "solve [ms]");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-14s %12.6f %9.2f%% %+12.5f %12.3f\n", r.label.c_str(),
                  r.total_fuel, r.saving_pct, r.terminal_soc_error, r.solve_mean * 1e3);
    out << buf;
  }
  out << "savings are relative to '" << reference_label << "'\n";
  return out.str();
}

}  // namespace hevsim
