#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "mars/pipeline.hpp"

namespace mars {

/// Dotted-key configuration file: "section.key = value" lines, '#' comments.
/// Typed getters record which keys the schema asked for; reject_unknown()
/// then refuses any key nobody recognized, naming it with its line number.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text, const std::string& name);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;

  void reject_unknown() const;

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  const Entry* request(const std::string& key) const;
  [[noreturn]] void fail(const Entry& e, const std::string& key, const std::string& what) const;

  std::string name_;
  std::map<std::string, Entry> entries_;
  mutable std::set<std::string> requested_;
};

struct SimConfig {
  double scene_extent = 10.0;
  std::string trajectory = "figure8";
  double traj_amplitude = 2.5;
  double traj_period = 20.0;
  bool yaw_follows = true;
  int scans = 100;
  double rate = 10.0;  // scans per second; also the sensor revolution rate
  int beams = 16;
  int azimuth_steps = 256;
  double max_range = 15.0;
  double noise_std = 0.0;
  std::uint64_t seed = 1;
};

/// Extract and validate the odometry keys (map.*, spline.*, reg.*, select.*).
PipelineConfig load_pipeline_config(const Config& cfg);

/// Extract and validate the simulation keys (sim.*).
SimConfig load_sim_config(const Config& cfg);

}  // namespace mars
