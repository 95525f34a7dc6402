#include "mars/sim/simulator.hpp"

#include <cstdlib>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mars {

namespace {

constexpr double kRayEps = 1e-9;
constexpr double kPi = std::numbers::pi;

bool hit_patch(const PlanarPatch& patch, const Vec3& o, const Vec3& d, double best,
               double* t_out) {
  Vec3 n = patch.edge_u.cross(patch.edge_v);
  double denom = n.dot(d);
  if (std::abs(denom) < 1e-15) return false;
  double t = n.dot(patch.origin - o) / denom;
  if (t <= kRayEps || t >= best) return false;
  Vec3 w = o + t * d - patch.origin;
  double uu = patch.edge_u.squaredNorm();
  double vv = patch.edge_v.squaredNorm();
  double uv = patch.edge_u.dot(patch.edge_v);
  double det = uu * vv - uv * uv;
  if (det <= 0.0) return false;
  double wu = w.dot(patch.edge_u);
  double wv = w.dot(patch.edge_v);
  double a = (vv * wu - uv * wv) / det;
  double b = (uu * wv - uv * wu) / det;
  if (a < -kRayEps || a > 1.0 + kRayEps || b < -kRayEps || b > 1.0 + kRayEps) return false;
  *t_out = t;
  return true;
}

bool hit_box(const AlignedBox& box, const Vec3& o, const Vec3& d, double best, double* t_out) {
  double tmin = 0.0;
  double tmax = best;
  for (int i = 0; i < 3; ++i) {
    if (d[i] == 0.0) {
      if (o[i] < box.min[i] || o[i] > box.max[i]) return false;
      continue;
    }
    double inv = 1.0 / d[i];
    double t1 = (box.min[i] - o[i]) * inv;
    double t2 = (box.max[i] - o[i]) * inv;
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return false;
  }
  double t = tmin > kRayEps ? tmin : tmax;  // tmin <= eps means the origin is inside
  if (t <= kRayEps || t >= best) return false;
  *t_out = t;
  return true;
}

}  // namespace

Scene make_room_scene(double side) {
  if (!(side > 0.0)) throw std::invalid_argument("room side must be positive");
  double h = 0.5 * side;
  double hz = 0.12 * side;  // hall proportions: floor and ceiling in beam reach
  Scene s;
  Vec3 ex = Vec3::UnitX() * side;
  Vec3 ey = Vec3::UnitY() * side;
  Vec3 ez = Vec3::UnitZ() * (2.0 * hz);
  Vec3 corner(-h, -h, -hz);
  s.patches.push_back({corner, ex, ey});              // floor
  s.patches.push_back({Vec3(-h, -h, hz), ex, ey});    // ceiling
  s.patches.push_back({corner, ey, ez});              // x- wall
  s.patches.push_back({Vec3(h, -h, -hz), ey, ez});    // x+ wall
  s.patches.push_back({corner, ex, ez});              // y- wall
  s.patches.push_back({Vec3(-h, h, -hz), ex, ez});    // y+ wall

  // floor clutter, asymmetric so no two headings look alike; one pillar tall
  // enough to cut the near-horizontal beams
  double e = side;
  s.boxes.push_back({Vec3(0.12 * e, -0.34 * e, -hz), Vec3(0.26 * e, -0.19 * e, -0.08 * e)});
  s.boxes.push_back({Vec3(-0.38 * e, 0.10 * e, -hz), Vec3(-0.20 * e, 0.22 * e, -0.085 * e)});
  s.boxes.push_back({Vec3(-0.10 * e, -0.45 * e, -hz), Vec3(0.02 * e, -0.33 * e, -0.02 * e)});
  s.boxes.push_back({Vec3(0.20 * e, 0.25 * e, -hz), Vec3(0.42 * e, 0.44 * e, -0.08 * e)});
  return s;
}

RayHit cast_ray(const Scene& scene, const Vec3& origin, const Vec3& dir, double max_range) {
  RayHit best;
  double t_best = max_range;
  double t = 0.0;
  for (const PlanarPatch& p : scene.patches) {
    if (hit_patch(p, origin, dir, t_best, &t)) {
      t_best = t;
      best.hit = true;
    }
  }
  for (const AlignedBox& b : scene.boxes) {
    if (hit_box(b, origin, dir, t_best, &t)) {
      t_best = t;
      best.hit = true;
    }
  }
  if (best.hit) {
    best.range = t_best;
    best.point = origin + t_best * dir;
  }
  return best;
}

TrajectoryModel TrajectoryModel::parse(const std::string& name) {
  TrajectoryModel m;
  if (name == "line")
    m.kind = Kind::kLine;
  else if (name == "circle")
    m.kind = Kind::kCircle;
  else if (name == "figure8")
    m.kind = Kind::kFigureEight;
  else
    throw std::invalid_argument("unknown trajectory '" + name + "' (line|circle|figure8)");
  return m;
}

SE3 TrajectoryModel::pose(double t) const {
  Vec3 p;
  double vx = 0.0;
  double vy = 0.0;
  double w = period > 0.0 ? 2.0 * kPi / period : 0.0;
  switch (kind) {
    case Kind::kLine:
      p = Vec3(amplitude * t, 0.0, height);
      vx = amplitude;
      break;
    case Kind::kCircle:
      p = Vec3(amplitude * std::cos(w * t), amplitude * std::sin(w * t), height);
      vx = -amplitude * w * std::sin(w * t);
      vy = amplitude * w * std::cos(w * t);
      break;
    case Kind::kFigureEight:
      p = Vec3(amplitude * std::sin(w * t), 0.5 * amplitude * std::sin(2.0 * w * t), height);
      vx = amplitude * w * std::cos(w * t);
      vy = amplitude * w * std::cos(2.0 * w * t);
      break;
  }
  SO3 r;
  if (yaw_follows && (vx != 0.0 || vy != 0.0))
    r = SO3::exp(Vec3(0.0, 0.0, std::atan2(vy, vx)));
  return SE3(r, p);
}

std::vector<double> SensorModel::even_elevations(int beams, double min_deg, double max_deg) {
  if (beams < 1) throw std::invalid_argument("sensor needs at least one beam");
  std::vector<double> out(static_cast<std::size_t>(beams));
  for (int b = 0; b < beams; ++b)
    out[static_cast<std::size_t>(b)] =
        (beams == 1 ? 0.5 * (min_deg + max_deg)
                    : min_deg + (max_deg - min_deg) * b / (beams - 1)) *
        kPi / 180.0;
  return out;
}

ScanFrame simulate_scan(const Scene& scene, const SensorModel& sensor,
                        const TrajectoryModel& traj, double t_start, std::uint32_t scan_id,
                        std::mt19937_64& rng) {
  if (sensor.beam_elevations_rad.empty() || sensor.azimuth_steps < 1)
    throw std::invalid_argument("sensor needs at least one beam and azimuth step");
  ScanFrame frame;
  frame.scan_id = scan_id;
  frame.base_timestamp = t_start;
  frame.points.reserve(sensor.beam_elevations_rad.size() *
                       static_cast<std::size_t>(sensor.azimuth_steps));

  std::normal_distribution<double> noise(0.0, 1.0);
  const bool freeze = std::getenv("MARS_SIM_FREEZE") != nullptr;
  for (int a = 0; a < sensor.azimuth_steps; ++a) {
    double tau = sensor.period * a / sensor.azimuth_steps;
    SE3 t = traj.pose(freeze ? t_start : t_start + tau);
    double azim = 2.0 * kPi * a / sensor.azimuth_steps;
    for (double elev : sensor.beam_elevations_rad) {
      Vec3 dir_s(std::cos(elev) * std::cos(azim), std::cos(elev) * std::sin(azim),
                 std::sin(elev));
      RayHit hit = cast_ray(scene, t.translation, t.rotation * dir_s, sensor.max_range);
      if (!hit.hit) continue;
      double range = hit.range;
      if (sensor.range_noise_std > 0.0) range += sensor.range_noise_std * noise(rng);
      if (range <= 0.0) continue;
      frame.points.add(range * dir_s, tau);
    }
  }
  return frame;
}

}  // namespace mars
