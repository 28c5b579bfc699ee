// Command-line frontend: run single experiments, compare controllers on one
// cycle, pre-solve DP policies, and sweep tuning parameters. Every subcommand
// leaves a machine-readable JSON summary in the output directory, including a
// diagnostic one when the run itself fails.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hevsim/harness.hpp"

using namespace hevsim;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string config;
  std::string cycle;
  std::string out;
  std::string label;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config, "JSON experiment config");
  cmd->add_option("--cycle", o.cycle, "drive cycle CSV (overrides config)");
  cmd->add_option("--out", o.out, "output directory (overrides config)");
  cmd->add_option("--seed", o.seed, "preview noise seed (overrides config)")
      ->each([&o](const std::string&) { o.seed_set = true; });
}

ExperimentConfig make_config(const CommonOpts& o) {
  ExperimentConfig cfg;
  if (!o.config.empty()) cfg = ExperimentConfig::from_json_file(o.config);
  if (!o.cycle.empty()) cfg.cycle_path = o.cycle;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.label.empty()) cfg.label = o.label;
  if (o.seed_set) cfg.seed = o.seed;
  return cfg;
}

void write_error_summary(const std::string& out_dir, const std::string& cmd,
                         const std::string& what) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) return;
  std::ofstream js(out_dir + "/" + cmd + "_error.json");
  js << json{{"command", cmd}, {"error", what}}.dump(2) << '\n';
}

int cmd_run(const CommonOpts& o, const std::string& controller) {
  ExperimentConfig cfg = make_config(o);
  if (!controller.empty()) cfg.controller = controller;
  try {
    RunReport rep = run(cfg);
    std::cout << rep.to_json() << '\n';
    return 0;
  } catch (const std::exception& e) {
    write_error_summary(cfg.out_dir, "run", e.what());
    throw;
  }
}

int cmd_compare(const CommonOpts& o, const std::vector<std::string>& controllers,
                const std::string& reference) {
  ExperimentConfig base = make_config(o);
  try {
    std::vector<RunReport> reports;
    for (const auto& name : controllers) {
      ExperimentConfig cfg = base;
      cfg.controller = name;
      cfg.label = name;
      reports.push_back(run(cfg));
      std::cerr << name << ": total fuel " << reports.back().total_fuel << " kg\n";
    }
    Comparison cmp = compare(reports, reference);
    std::cout << cmp.to_text();
    std::ofstream csv(base.out_dir + "/comparison.csv");
    csv << cmp.to_csv();
    json j;
    j["reference"] = cmp.reference_label;
    for (const auto& r : cmp.rows)
      j["rows"].push_back({{"label", r.label},
                           {"total_fuel_kg", r.total_fuel},
                           {"saving_pct", r.saving_pct},
                           {"terminal_soc_error", r.terminal_soc_error},
                           {"solve_mean_s", r.solve_mean}});
    std::ofstream js(base.out_dir + "/comparison.json");
    js << j.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    write_error_summary(base.out_dir, "compare", e.what());
    throw;
  }
}

int cmd_dp_solve(const CommonOpts& o, const std::string& cache) {
  ExperimentConfig cfg = make_config(o);
  if (!cache.empty()) cfg.dp_policy_cache = cache;
  if (cfg.dp_policy_cache.empty()) throw ConfigError("dp-solve needs --cache or dp.policy_cache");
  try {
    const LoadResult lr = load_cycle(cfg.cycle_path);
    DpGrid grid;
    grid.soc_points = DpGrid::linspace(cfg.bounds.soc_min, cfg.bounds.soc_max, cfg.dp_soc_points);
    grid.t_cl_points =
        DpGrid::linspace(cfg.bounds.t_cl_min, cfg.bounds.t_cl_max, cfg.dp_t_cl_points);
    grid.control_points = DpGrid::linspace(cfg.split.battery.p_bat_min,
                                           cfg.split.battery.p_bat_max, cfg.dp_control_points);
    DpParams params{{cfg.soc_init, cfg.t_cl_init}, cfg.dp_terminal_band, cfg.split,
                    cfg.thermal,  cfg.alpha,       cfg.bounds,          cfg.road};
    DpPolicy pol = solve_dp(lr.cycle, grid, params);
    save_policy(pol, cfg.dp_policy_cache);
    double f = 0.0, w = 0.0;
    pol.interp(0, cfg.soc_init, cfg.t_cl_init, f, w);
    json j{{"cycle", lr.cycle.name},
           {"policy", cfg.dp_policy_cache},
           {"steps", pol.n_steps},
           {"grid", {pol.nsoc(), pol.ntcl(), (int)pol.grid.control_points.size()}},
           {"predicted_fuel_kg", f},
           {"dead_weight_at_start", w}};
    std::cout << j.dump(2) << '\n';
    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    std::ofstream js(cfg.out_dir + "/dp_solve_summary.json");
    js << j.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    write_error_summary(cfg.out_dir, "dp-solve", e.what());
    throw;
  }
}

void apply_sweep_value(ExperimentConfig& cfg, const std::string& param, double v) {
  if (param == "lambda")
    cfg.baseline.lambda = v;
  else if (param == "H" || param == "horizon")
    cfg.baseline.horizon_steps = static_cast<int>(v);
  else if (param == "N")
    cfg.mh.n = static_cast<int>(v);
  else if (param == "dt2")
    cfg.mh.dt2 = v;
  else if (param == "noise_std")
    cfg.preview_model.noise_std = v;
  else
    throw ConfigError("unknown sweep parameter: " + param +
                      " (expected lambda, H, N, dt2, or noise_std)");
}

int cmd_sweep(const CommonOpts& o, const std::string& controller, const std::string& param,
              const std::vector<double>& values) {
  ExperimentConfig base = make_config(o);
  if (!controller.empty()) base.controller = controller;
  if (values.empty()) throw ConfigError("sweep needs at least one --values entry");
  try {
    json rows = json::array();
    std::printf("%-22s %12s %12s %12s\n", "point", "fuel [kg]", "d soc", "solve [ms]");
    for (double v : values) {
      ExperimentConfig cfg = base;
      apply_sweep_value(cfg, param, v);
      char lbl[64];
      std::snprintf(lbl, sizeof lbl, "%s_%s_%g", cfg.controller.c_str(), param.c_str(), v);
      cfg.label = lbl;
      RunReport rep = run(cfg);
      std::printf("%-22s %12.6f %+12.5f %12.3f\n", lbl, rep.total_fuel, rep.terminal_soc_error,
                  rep.solve_mean * 1e3);
      rows.push_back({{"label", rep.label},
                      {"param", param},
                      {"value", v},
                      {"total_fuel_kg", rep.total_fuel},
                      {"terminal_soc_error", rep.terminal_soc_error},
                      {"soc_violation_integral", rep.soc_violation},
                      {"t_cl_violation_integral", rep.t_cl_violation},
                      {"solve_mean_s", rep.solve_mean}});
    }
    std::error_code ec;
    std::filesystem::create_directories(base.out_dir, ec);
    std::ofstream js(base.out_dir + "/sweep_" + param + ".json");
    js << rows.dump(2) << '\n';
    return 0;
  } catch (const std::exception& e) {
    write_error_summary(base.out_dir, "sweep", e.what());
    throw;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid powertrain simulation and control toolkit"};
  app.require_subcommand(1);

  CommonOpts run_o, cmp_o, dp_o, sw_o;
  std::string run_controller, cmp_reference = "rule", dp_cache, sw_controller, sw_param;
  std::vector<std::string> cmp_controllers = {"rule", "baseline-mpc", "mh-mpc", "dp"};
  std::vector<double> sw_values;

  CLI::App* c_run = app.add_subcommand("run", "run one controller over one cycle");
  add_common(c_run, run_o);
  c_run->add_option("--controller", run_controller, "rule | baseline-mpc | mh-mpc | dp");
  c_run->add_option("--label", run_o.label, "label used in output file names");

  CLI::App* c_cmp = app.add_subcommand("compare", "run several controllers on the same cycle");
  add_common(c_cmp, cmp_o);
  c_cmp->add_option("--controllers", cmp_controllers, "controllers to run")->delimiter(',');
  c_cmp->add_option("--reference", cmp_reference, "label savings are measured against");

  CLI::App* c_dp = app.add_subcommand("dp-solve", "solve and persist a DP policy");
  add_common(c_dp, dp_o);
  c_dp->add_option("--cache", dp_cache, "policy file to write");

  CLI::App* c_sw = app.add_subcommand("sweep", "sweep one tuning parameter");
  add_common(c_sw, sw_o);
  c_sw->add_option("--controller", sw_controller, "controller to sweep");
  c_sw->add_option("--param", sw_param, "lambda | H | N | dt2 | noise_std")->required();
  c_sw->add_option("--values", sw_values, "parameter values")->delimiter(',')->required();

  try {
    app.parse(argc, argv);
    if (c_run->parsed()) return cmd_run(run_o, run_controller);
    if (c_cmp->parsed()) return cmd_compare(cmp_o, cmp_controllers, cmp_reference);
    if (c_dp->parsed()) return cmd_dp_solve(dp_o, dp_cache);
    if (c_sw->parsed()) return cmd_sweep(sw_o, sw_controller, sw_param, sw_values);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
