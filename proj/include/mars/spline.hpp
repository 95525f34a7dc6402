#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mars/lie.hpp"

namespace mars {

struct ControlPose {
  SO3 rotation;
  Vec3 position = Vec3::Zero();
};

struct SegmentPhase {
  std::int64_t segment = 0;
  double phase = 0.0;  // in [0, 1)
};

/// Floor-based segment index and normalized phase for knots t0 + i * dt.
SegmentPhase segment_and_phase(double t, double t0, double dt);

/// Cumulative blending coefficients lambda_1..lambda_{k-1}: suffix sums of the
/// uniform B-spline basis of order k, evaluated as precomputed polynomial rows.
/// Supported orders are 2, 3 and 4. Values outside [0, 1] extrapolate the
/// segment polynomials.
void cumulative_blending(int order, double u, double* out);

/// Continuous pose track over a single active segment [t0, t0 + dt] with
/// exactly `order` control poses. Position blends control differences with the
/// cumulative coefficients; rotation chains the exponentials of scaled
/// control-rotation differences onto the first control rotation.
class TrajectorySpline {
 public:
  TrajectorySpline(int order, double t0, double dt, std::vector<ControlPose> control);

  static TrajectorySpline constant(int order, double t0, double dt, const SE3& pose);

  int order() const { return order_; }
  double knot_origin() const { return t0_; }
  double knot_spacing() const { return dt_; }
  std::span<const ControlPose> control_poses() const { return control_; }
  ControlPose& control_pose(int i) { return control_[i]; }

  /// Pose at t. t must lie inside the active segment (a 1e-9 relative slack
  /// absorbs boundary roundoff); throws std::out_of_range otherwise.
  SE3 evaluate(double t) const;

  /// Pose at t without the domain check; extrapolates outside the segment.
  SE3 evaluate_unchecked(double t) const;

  /// Same spline with all control positions offset by delta.
  TrajectorySpline translated(const Vec3& delta) const;

 private:
  SE3 eval_phase(double s) const;

  int order_;
  double t0_;
  double dt_;
  std::vector<ControlPose> control_;
};

struct ReinitResult {
  TrajectorySpline spline;
  bool converged = false;
  int iterations = 0;
  double warm_residual = 0.0;   // squared objective at the warm start
  double final_residual = 0.0;  // squared objective at the returned spline
};

/// Re-fit control poses over a new segment so the spline reproduces the given
/// timed poses. Warm start: the previous control poses shifted by the whole
/// number of knot spacings the origin moved (usually zero), the tail
/// extrapolated by repeating the final pose difference. A 1e-6-weighted pull
/// toward the warm start keeps underdetermined fits well-posed. Only
/// improving steps are accepted, so the result never scores worse than the
/// warm start.
ReinitResult reinit_after_shift(const TrajectorySpline& previous,
                                std::span<const std::pair<double, SE3>> samples,
                                double new_t0, double new_dt);

}  // namespace mars
