#include "mars/io/config.hpp"

#include <climits>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mars {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Config Config::parse_string(const std::string& text, const std::string& name) {
  Config cfg;
  cfg.name_ = name;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(name + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty() || value.empty())
      throw std::invalid_argument(name + ":" + std::to_string(lineno) +
                                  ": expected 'key = value'");
    auto [it, inserted] = cfg.entries_.emplace(key, Entry{value, lineno});
    if (!inserted)
      throw std::invalid_argument(name + ":" + std::to_string(lineno) + ": duplicate key '" +
                                  key + "' (first on line " + std::to_string(it->second.line) +
                                  ")");
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument(path + ": cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_string(buf.str(), path);
}

const Config::Entry* Config::request(const std::string& key) const {
  requested_.insert(key);
  auto it = entries_.find(key);
  return it == entries_.end() ? nullptr : &it->second;
}

void Config::fail(const Entry& e, const std::string& key, const std::string& what) const {
  throw std::invalid_argument(name_ + ":" + std::to_string(e.line) + ": key '" + key + "': " +
                              what);
}

double Config::get_double(const std::string& key, double fallback) const {
  const Entry* e = request(key);
  if (e == nullptr) return fallback;
  char* end = nullptr;
  double v = std::strtod(e->value.c_str(), &end);
  if (end != e->value.c_str() + e->value.size()) fail(*e, key, "not a number");
  return v;
}

int Config::get_int(const std::string& key, int fallback) const {
  const Entry* e = request(key);
  if (e == nullptr) return fallback;
  char* end = nullptr;
  long v = std::strtol(e->value.c_str(), &end, 10);
  if (end != e->value.c_str() + e->value.size() || v < INT_MIN || v > INT_MAX)
    fail(*e, key, "not an integer");
  return static_cast<int>(v);
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const Entry* e = request(key);
  if (e == nullptr) return fallback;
  char* end = nullptr;
  unsigned long long v = std::strtoull(e->value.c_str(), &end, 10);
  if (end != e->value.c_str() + e->value.size()) fail(*e, key, "not an unsigned integer");
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = request(key);
  if (e == nullptr) return fallback;
  if (e->value == "true" || e->value == "1") return true;
  if (e->value == "false" || e->value == "0") return false;
  fail(*e, key, "expected true|false|1|0");
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const Entry* e = request(key);
  return e == nullptr ? fallback : e->value;
}

void Config::reject_unknown() const {
  for (const auto& [key, entry] : entries_)
    if (requested_.count(key) == 0)
      throw std::invalid_argument(name_ + ":" + std::to_string(entry.line) +
                                  ": unknown key '" + key + "'");
}

PipelineConfig load_pipeline_config(const Config& cfg) {
  PipelineConfig p;
  p.map.side_length = cfg.get_double("map.side_length", p.map.side_length);
  p.map.cell_size = cfg.get_double("map.cell_size", p.map.cell_size);
  p.map.levels = cfg.get_int("map.levels", p.map.levels);
  std::string backend = cfg.get_string("map.backend", "grid");
  if (backend == "grid")
    p.map.backend = Backend::kGrid;
  else if (backend == "lattice")
    p.map.backend = Backend::kLattice;
  else
    throw std::invalid_argument("map.backend: expected grid|lattice, got '" + backend + "'");
  p.map.max_keyframes = cfg.get_int("map.max_keyframes", p.map.max_keyframes);
  p.map.keyframe_distance = cfg.get_double("map.keyframe_distance", p.map.keyframe_distance);

  p.spline_order = cfg.get_int("spline.order", p.spline_order);
  p.window_scans = cfg.get_int("spline.window_scans", p.window_scans);
  p.t_pred = cfg.get_double("spline.t_pred", p.t_pred);

  p.reg.sigma_scale = cfg.get_double("reg.sigma_scale", p.reg.sigma_scale);
  p.reg.outlier_prior = cfg.get_double("reg.outlier_prior", p.reg.outlier_prior);
  p.reg.em_max_iterations = cfg.get_int("reg.em_iters", p.reg.em_max_iterations);
  p.reg.lm_max_iterations = cfg.get_int("reg.lm_iters", p.reg.lm_max_iterations);

  p.select.theta_planar = cfg.get_double("select.theta_planar", p.select.theta_planar);
  p.select.theta_scale = cfg.get_double("select.theta_scale", p.select.theta_scale);
  p.select.theta_degenerate =
      cfg.get_double("select.theta_degenerate", p.select.theta_degenerate);
  p.select.theta_normal = cfg.get_double("select.theta_normal", p.select.theta_normal);
  p.select.enabled = cfg.get_bool("select.enabled", p.select.enabled);

  if (!(p.map.side_length > 0.0)) throw std::invalid_argument("map.side_length must be > 0");
  if (!(p.map.cell_size > 0.0)) throw std::invalid_argument("map.cell_size must be > 0");
  if (p.map.levels < 1) throw std::invalid_argument("map.levels must be >= 1");
  if (p.map.max_keyframes < 1) throw std::invalid_argument("map.max_keyframes must be >= 1");
  if (!(p.map.keyframe_distance >= 0.0))
    throw std::invalid_argument("map.keyframe_distance must be >= 0");
  if (p.spline_order < 2 || p.spline_order > 4)
    throw std::invalid_argument("spline.order must be 2, 3 or 4");
  if (p.window_scans < 1) throw std::invalid_argument("spline.window_scans must be >= 1");
  if (!(p.t_pred >= 0.0)) throw std::invalid_argument("spline.t_pred must be >= 0");
  if (!(p.reg.sigma_scale > 0.0)) throw std::invalid_argument("reg.sigma_scale must be > 0");
  if (!(p.reg.outlier_prior >= 0.0))
    throw std::invalid_argument("reg.outlier_prior must be >= 0");
  if (p.reg.em_max_iterations < 1) throw std::invalid_argument("reg.em_iters must be >= 1");
  if (p.reg.lm_max_iterations < 1) throw std::invalid_argument("reg.lm_iters must be >= 1");
  return p;
}

SimConfig load_sim_config(const Config& cfg) {
  SimConfig s;
  s.scene_extent = cfg.get_double("sim.scene_extent", s.scene_extent);
  s.trajectory = cfg.get_string("sim.trajectory", s.trajectory);
  s.traj_amplitude = cfg.get_double("sim.traj_amplitude", s.traj_amplitude);
  s.traj_period = cfg.get_double("sim.traj_period", s.traj_period);
  s.yaw_follows = cfg.get_bool("sim.yaw_follows", s.yaw_follows);
  s.scans = cfg.get_int("sim.scans", s.scans);
  s.rate = cfg.get_double("sim.rate", s.rate);
  s.beams = cfg.get_int("sim.beams", s.beams);
  s.azimuth_steps = cfg.get_int("sim.azimuth_steps", s.azimuth_steps);
  s.max_range = cfg.get_double("sim.max_range", s.max_range);
  s.noise_std = cfg.get_double("sim.noise_std", s.noise_std);
  s.seed = cfg.get_u64("sim.seed", s.seed);

  if (!(s.scene_extent > 0.0)) throw std::invalid_argument("sim.scene_extent must be > 0");
  if (s.trajectory != "line" && s.trajectory != "circle" && s.trajectory != "figure8")
    throw std::invalid_argument("sim.trajectory must be line|circle|figure8");
  if (!(s.traj_period > 0.0)) throw std::invalid_argument("sim.traj_period must be > 0");
  if (s.scans < 0) throw std::invalid_argument("sim.scans must be >= 0");
  if (!(s.rate > 0.0)) throw std::invalid_argument("sim.rate must be > 0");
  if (s.beams < 1) throw std::invalid_argument("sim.beams must be >= 1");
  if (s.azimuth_steps < 1) throw std::invalid_argument("sim.azimuth_steps must be >= 1");
  if (!(s.max_range > 0.0)) throw std::invalid_argument("sim.max_range must be > 0");
  if (!(s.noise_std >= 0.0)) throw std::invalid_argument("sim.noise_std must be >= 0");
  return s;
}

}  // namespace mars
