#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mars/lie.hpp"
#include "mars/types.hpp"

namespace mars {

/// Parallelogram patch: origin + a * edge_u + b * edge_v for a, b in [0, 1].
struct PlanarPatch {
  Vec3 origin = Vec3::Zero();
  Vec3 edge_u = Vec3::UnitX();
  Vec3 edge_v = Vec3::UnitY();
};

struct AlignedBox {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();
};

struct Scene {
  std::vector<PlanarPatch> patches;
  std::vector<AlignedBox> boxes;
};

/// Closed cubic room of the given side length centered on the origin, with a
/// few boxes standing on the floor so the walls are not the only structure.
Scene make_room_scene(double side);

struct RayHit {
  bool hit = false;
  double range = 0.0;
  Vec3 point = Vec3::Zero();
};

/// Nearest intersection of the ray with any patch or box within max_range.
/// Patches are two-sided; `dir` must be unit length.
RayHit cast_ray(const Scene& scene, const Vec3& origin, const Vec3& dir, double max_range);

/// Spinning multi-beam sensor. One revolution takes `period` seconds; each
/// azimuth column carries its own time offset, so points of one scan are taken
/// from a moving platform (rolling shutter).
struct SensorModel {
  static std::vector<double> even_elevations(int beams, double min_deg, double max_deg);

  std::vector<double> beam_elevations_rad = even_elevations(16, -15.0, 15.0);
  int azimuth_steps = 256;
  double max_range = 15.0;
  double period = 0.1;
  double range_noise_std = 0.0;
};

/// Analytic world-frame trajectories with the heading following the velocity.
struct TrajectoryModel {
  enum class Kind { kLine, kCircle, kFigureEight };

  Kind kind = Kind::kFigureEight;
  double amplitude = 2.5;  // line: speed in m/s; circle/eight: extent in m
  double period = 20.0;    // seconds per loop (unused for the line)
  double height = 0.0;
  bool yaw_follows = true;

  static TrajectoryModel parse(const std::string& name);

  SE3 pose(double t) const;
};

/// One revolution starting at t_start. Points are in the sensor frame of
/// their own column's pose with per-point offsets from the scan base time;
/// columns are ordered by azimuth, beams bottom-up within a column.
ScanFrame simulate_scan(const Scene& scene, const SensorModel& sensor,
                        const TrajectoryModel& traj, double t_start, std::uint32_t scan_id,
                        std::mt19937_64& rng);

}  // namespace mars
