#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "mars/map/multires_map.hpp"
#include "mars/reg/registration.hpp"
#include "mars/spline.hpp"
#include "mars/types.hpp"

namespace mars {

struct PipelineConfig {
  MapConfig map;
  SelectionConfig select;
  RegistrationConfig reg;
  int spline_order = 3;
  int window_scans = 3;
  double t_pred = 0.1;  // prediction offset in seconds
};

struct PoseEstimate {
  double timestamp = 0.0;
  SE3 world_pose;
  double predicted_timestamp = 0.0;
  SE3 predicted_world_pose;
  bool low_confidence = false;  // registration found nothing to hold on to
};

struct ScanDiagnostics {
  std::uint32_t scan_id = 0;
  double timestamp = 0.0;
  std::size_t scan_surfels = 0;  // selected surfels registered this scan
  std::size_t map_cells = 0;
  int em_iterations = 0;
  double registration_seconds = 0.0;
  bool keyframed = false;
  std::array<int, 3> shift{0, 0, 0};
  bool nll_monotone = true;
  bool degenerate = false;
  bool unconstrained = false;
  double final_cost = 0.0;
  double outlier_mass = 0.0;
};

/// Per-scan odometry: each scan gets its own surfel map at identity, the
/// window of the last n scans is registered jointly against the local map
/// under a continuous-time pose spline, keyframes feed the map, and the map
/// stays centered on the sensor by whole-cell shifts.
class OdometryPipeline {
 public:
  explicit OdometryPipeline(const PipelineConfig& cfg);

  /// First call bootstraps at identity; later calls require strictly
  /// increasing base timestamps.
  PoseEstimate process_scan(const ScanFrame& frame);

  const LocalMultiResMap& map() const { return map_; }
  const std::vector<ScanDiagnostics>& diagnostics() const { return diags_; }
  const TrajectorySpline* spline() const { return spline_ ? &*spline_ : nullptr; }

 private:
  struct WindowEntry {
    std::uint32_t scan_id = 0;
    double timestamp = 0.0;
    LocalMultiResMap scan_map;
    PointCloud points;
  };

  PoseEstimate bootstrap(const ScanFrame& frame);
  LocalMultiResMap build_scan_map(const ScanFrame& frame) const;

  PipelineConfig cfg_;
  LocalMultiResMap map_;
  std::deque<WindowEntry> window_;
  std::optional<TrajectorySpline> spline_;
  double window_origin_time_ = 0.0;  // time of the last scan dropped from the window
  double last_timestamp_ = 0.0;
  Vec3 last_keyframe_world_ = Vec3::Zero();
  std::vector<ScanDiagnostics> diags_;
};

}  // namespace mars
