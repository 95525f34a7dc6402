#pragma once

#include <array>
#include <deque>
#include <unordered_set>
#include <vector>

#include "mars/lie.hpp"
#include "mars/map/sparse_level.hpp"

namespace mars {

struct MapConfig {
  double side_length = 30.0;  // coarsest cube side: twice the sensor range
  double cell_size = 1.5;     // coarsest cell spacing
  int levels = 3;
  Backend backend = Backend::kGrid;
  int max_keyframes = 4;
  double keyframe_distance = 0.5;
};

struct SelectionConfig {
  bool enabled = false;
  double theta_planar = 0.01;
  double theta_scale = 0.01;
  double theta_degenerate = 0.1;
  double theta_normal = 0.8;
};

struct ResolvedSurfel {
  Surfel surfel;
  int level = 0;
  CellKey key;
};

struct Keyframe {
  std::uint32_t scan_id = 0;
  SE3 pose;  // sensor pose in the map frame at integration time
};

/// Egocentric multi-resolution surfel map. Level l halves both the cell
/// spacing and the covered cube of level l-1; points land on the finest level
/// whose cube contains them. Content stays centered on the sensor by shifting
/// whole coarsest cells, with the world anchor T_ws updated so world-frame
/// geometry is preserved.
class LocalMultiResMap {
 public:
  explicit LocalMultiResMap(const MapConfig& cfg);

  const MapConfig& config() const { return cfg_; }
  int num_levels() const { return cfg_.levels; }
  double level_spacing(int l) const { return cfg_.cell_size / static_cast<double>(1 << l); }
  double level_half_side(int l) const {
    return cfg_.side_length / static_cast<double>(2 << l);
  }

  /// Finest level whose centered cube contains p (max-norm test); -1 when p
  /// is outside the coarsest cube.
  int level_for_point(const Vec3& p) const;

  SparseLevel& level(int l) { return levels_[l]; }
  const SparseLevel& level(int l) const { return levels_[l]; }

  /// Transform a sensor-frame cloud by `pose` and fuse it, one keyframe per
  /// scan. Combined surfels of touched cells are rebuilt before returning.
  void integrate_scan(const PointCloud& cloud, const SE3& pose, std::uint32_t scan_id);

  /// Drop oldest keyframes (and their points) until at most `max_keyframes`
  /// remain.
  void enforce_window(int max_keyframes);
  void enforce_window() { enforce_window(cfg_.max_keyframes); }

  /// Shift quantum per axis: the coarsest cell spacing for the grid backend,
  /// the lattice cube period for the lattice backend.
  double shift_quantum() const;

  /// Re-center the map on the sensor once it has moved at least one whole
  /// quantum along any axis. Returns the applied shift in quanta (zero when
  /// nothing happened). Cells leaving a level's cube are discarded.
  std::array<int, 3> maybe_shift(const SE3& sensor_pose);

  /// Valid surfels for registration. Groups of valid fine surfels whose
  /// parent cell passes the planarity/degeneracy conditions are replaced by
  /// their merged coarse surfel, cascading level by level toward the
  /// coarsest; everything else is emitted at its own resolution.
  std::vector<ResolvedSurfel> adaptive_select(const SelectionConfig& sel) const;

  /// All valid combined surfels at their native levels.
  std::vector<ResolvedSurfel> all_valid_surfels() const;

  const SE3& map_pose() const { return map_pose_; }
  void set_map_pose(const SE3& p) { map_pose_ = p; }
  const Vec3& sensor_origin() const { return sensor_origin_; }
  const std::deque<Keyframe>& keyframes() const { return keyframes_; }

  std::int64_t point_count() const;

  /// Running total the cells must agree with: points accepted by
  /// integrate_scan minus points removed with scans or dropped by shifts.
  std::int64_t expected_point_count() const { return ledger_; }

 private:
  MapConfig cfg_;
  std::vector<SparseLevel> levels_;
  SE3 map_pose_;
  Vec3 sensor_origin_ = Vec3::Zero();
  std::deque<Keyframe> keyframes_;
  std::unordered_set<std::uint32_t> integrated_ids_;
  std::int64_t ledger_ = 0;

  // scratch buffers for integrate_scan
  std::vector<double> tx_, ty_, tz_;
  std::vector<double> gx_, gy_, gz_;
  std::vector<std::uint32_t> level_of_;
};

}  // namespace mars
