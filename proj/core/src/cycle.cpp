#include "hevsim/cycle.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hevsim {
namespace {

double parse_number(const std::string& tok, const std::string& origin, std::size_t lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(origin + ":" + std::to_string(lineno) + ": bad numeric token '" + tok +
                     "'");
  }
}

// splitmix64; fixed mixing so preview noise is identical across platforms.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double standard_normal(std::uint64_t key) {
  // Box-Muller on two hashed uniforms in (0, 1).
  const double u1 =
      (static_cast<double>(mix64(key) >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  const double u2 =
      (static_cast<double>(mix64(key ^ 0xdeadbeefULL) >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace

double DriveCycle::distance() const {
  double d = 0.0;
  for (double v : speeds) d += v;
  return d;
}

LoadResult load_cycle_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::vector<double> times, speeds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string tok;
    while (ls >> tok) toks.push_back(tok);
    if (toks.empty()) continue;
    if (toks.size() != 2)
      throw ParseError(origin + ":" + std::to_string(lineno) + ": expected 2 columns, got " +
                       std::to_string(toks.size()));
    // Tolerate a single header row of non-numeric labels.
    if (times.empty() && lineno <= 2) {
      try {
        std::stod(toks[0]);
      } catch (const std::exception&) {
        continue;
      }
    }
    times.push_back(parse_number(toks[0], origin, lineno));
    speeds.push_back(parse_number(toks[1], origin, lineno));
  }
  if (times.size() < 2) throw ValidationError(origin + ": cycle needs at least two samples");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (speeds[i] < 0.0)
      throw ValidationError(origin + ": negative speed at t=" + std::to_string(times[i]));
    if (i > 0 && !(times[i] > times[i - 1]))
      throw ValidationError(origin + ": time must be strictly increasing");
  }

  LoadResult out;
  out.cycle.name = origin;
  bool uniform = times.front() == 0.0;
  for (std::size_t i = 1; uniform && i < times.size(); ++i)
    uniform = std::abs(times[i] - times[i - 1] - 1.0) < 1e-9;
  if (uniform) {
    out.cycle.speeds = speeds;
  } else {
    out.warnings.push_back(origin + ": non-uniform sampling, resampled to 1 s");
    const int n = static_cast<int>(std::floor(times.back() - times.front())) + 1;
    out.cycle.speeds.reserve(n);
    std::size_t k = 1;
    for (int i = 0; i < n; ++i) {
      const double t = times.front() + i;
      while (k + 1 < times.size() && times[k] < t) ++k;
      const double s = (t - times[k - 1]) / (times[k] - times[k - 1]);
      out.cycle.speeds.push_back(speeds[k - 1] +
                                 std::clamp(s, 0.0, 1.0) * (speeds[k] - speeds[k - 1]));
    }
  }
  return out;
}

LoadResult load_cycle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open cycle file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  auto res = load_cycle_text(buf.str(), path);
  // Keep the file stem as the cycle name.
  auto slash = path.find_last_of("/\\");
  std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
  auto dot = stem.find_last_of('.');
  if (dot != std::string::npos) stem.erase(dot);
  res.cycle.name = stem;
  return res;
}

Preview preview(const DriveCycle& cycle, int t, const PreviewModel& pm) {
  const int t_end = cycle.duration();
  if (t < 0 || t >= t_end)
    throw OutOfRange("preview time " + std::to_string(t) + " outside [0, " +
                     std::to_string(t_end) + ")");
  if (pm.accurate_window < 1 || pm.coarse_step < 1 || pm.noise_std < 0.0)
    throw ValidationError("preview model fields out of range");

  Preview out;
  const int fine_end = std::min(t + pm.accurate_window, t_end);
  out.fine.assign(cycle.speeds.begin() + t, cycle.speeds.begin() + fine_end);

  int bin = 0;
  for (int b0 = t + pm.accurate_window; b0 < t_end; b0 += pm.coarse_step, ++bin) {
    const int b1 = std::min(b0 + pm.coarse_step, t_end);
    double mean = 0.0;
    for (int i = b0; i < b1; ++i) mean += cycle.speeds[i];
    mean /= (b1 - b0);
    if (pm.noise_std > 0.0) {
      const std::uint64_t key =
          mix64(pm.seed ^ mix64(static_cast<std::uint64_t>(t) * 0x10001ULL + bin));
      mean = std::max(0.0, mean + pm.noise_std * standard_normal(key));
    }
    out.coarse.push_back(mean);
  }
  return out;
}

std::vector<double> demand_profile(const std::vector<double>& speeds, double step,
                                   const RoadLoadParams& rl) {
  if (speeds.empty()) throw SizeMismatch("demand_profile needs at least one speed");
  const std::size_t n = speeds.size();
  std::vector<double> out(n);
  double accel = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 < n) accel = (speeds[i + 1] - speeds[i]) / step;
    out[i] = power_demand(speeds[i], accel, rl);
  }
  return out;
}

}  // namespace hevsim
