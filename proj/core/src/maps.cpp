#include "hevsim/maps.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hevsim {

EngineMap EngineMap::defaults() {
  EngineMap em;
  // Speed rises linearly from idle to rated along the line; torque follows so
  // that omega * tau matches the power exactly at every row.
  const double w_idle = 104.7, w_rated = 419.0;
  const int rows = 15;
  em.ool.reserve(rows);
  for (int i = 0; i < rows; ++i) {
    const double p = em.p_eng_max * i / (rows - 1);
    const double w = w_idle + (w_rated - w_idle) * p / em.p_eng_max;
    em.ool.push_back({p, w, p / w});
  }
  return em;
}

double nominal_fuel_rate(double p_eng, const EngineMap& em) {
  if (p_eng < 0.0 || p_eng > em.p_eng_max)
    throw PowerOutOfRange("engine power " + std::to_string(p_eng) + " W outside [0, " +
                          std::to_string(em.p_eng_max) + "]");
  if (p_eng == 0.0) return 0.0;
  return em.idle_fuel_rate + em.willans_slope * p_eng;
}

double corrected_fuel_rate(double p_eng, double t_cl, const EngineMap& em,
                           const AlphaCurve& alpha) {
  return alpha(t_cl) * nominal_fuel_rate(p_eng, em);
}

OolPoint ool_point(double p_eng, const EngineMap& em) {
  if (p_eng < 0.0 || p_eng > em.p_eng_max)
    throw PowerOutOfRange("no operating-line point for " + std::to_string(p_eng) + " W");
  const auto& t = em.ool;
  if (t.empty()) throw ValidationError("engine map has no operating-line table");
  if (p_eng <= t.front().p_eng) return t.front();
  if (p_eng >= t.back().p_eng) return t.back();
  std::size_t hi = 1;
  while (hi < t.size() && t[hi].p_eng < p_eng) ++hi;
  const auto& a = t[hi - 1];
  const auto& b = t[hi];
  const double s = (p_eng - a.p_eng) / (b.p_eng - a.p_eng);
  return {p_eng, a.omega + s * (b.omega - a.omega), a.torque + s * (b.torque - a.torque)};
}

double power_demand(double speed, double accel, const RoadLoadParams& rl) {
  const double g = 9.81;
  const double force = rl.mass * accel + rl.mass * g * rl.rolling_coeff +
                       0.5 * rl.air_density * rl.drag_area * speed * speed;
  const double p_wheel = speed * force;
  if (p_wheel > 0.0) return p_wheel / rl.driveline_eff;
  return std::max(p_wheel * rl.driveline_eff, -rl.regen_cap);
}

std::vector<std::vector<double>> load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open table file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": bad numeric token '" + tok +
                         "'");
      }
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(path + ":" + std::to_string(lineno) + ": inconsistent column count");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(path + ": table has no data rows");
  return rows;
}

AlphaCurve alpha_from_file(const std::string& path) {
  const auto rows = load_table(path);
  if (rows.front().size() != 2)
    throw ValidationError(path + ": cold-penalty table needs exactly two columns");
  std::vector<double> xs, ys;
  for (const auto& r : rows) {
    xs.push_back(r[0]);
    if (r[1] < 1.0) throw ValidationError(path + ": fuel multiplier below one");
    ys.push_back(r[1]);
  }
  AlphaCurve a;
  a.curve = PiecewiseLinear(xs, ys);
  a.warm_temp = xs.back();
  for (std::size_t i = 0; i < ys.size(); ++i) {
    if (ys[i] == 1.0) {
      a.warm_temp = xs[i];
      break;
    }
  }
  return a;
}

void ool_from_file(const std::string& path, EngineMap& em) {
  const auto rows = load_table(path);
  if (rows.front().size() != 3)
    throw ValidationError(path + ": operating-line table needs exactly three columns");
  std::vector<OolPoint> pts;
  for (const auto& r : rows) {
    if (!pts.empty() && !(r[0] > pts.back().p_eng))
      throw ValidationError(path + ": operating-line powers must be strictly increasing");
    pts.push_back({r[0], r[1], r[2]});
  }
  em.ool = std::move(pts);
}

}  // namespace hevsim
