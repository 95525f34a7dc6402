#include "mars/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <utility>

namespace mars {

OdometryPipeline::OdometryPipeline(const PipelineConfig& cfg) : cfg_(cfg), map_(cfg.map) {
  if (cfg.spline_order < 2 || cfg.spline_order > 4)
    throw std::invalid_argument("spline order must be 2, 3 or 4");
  if (cfg.window_scans < 1) throw std::invalid_argument("window needs at least one scan");
  if (!(cfg.t_pred >= 0.0)) throw std::invalid_argument("prediction offset must be >= 0");
}

namespace {

/// Time the scan's content is centered on. Points arrive over a whole
/// revolution without undistortion, so a scan map is best explained by the
/// pose at its mean point time, not at the first point.
double content_anchor(const ScanFrame& frame) {
  if (frame.points.empty()) return frame.base_timestamp;
  double sum = 0.0;
  for (double tau : frame.points.t) sum += tau;
  return frame.base_timestamp + sum / static_cast<double>(frame.points.size());
}

}  // namespace

LocalMultiResMap OdometryPipeline::build_scan_map(const ScanFrame& frame) const {
  MapConfig mc = cfg_.map;
  mc.max_keyframes = 1;
  LocalMultiResMap m(mc);
  m.integrate_scan(frame.points, SE3(), frame.scan_id);
  return m;
}

PoseEstimate OdometryPipeline::bootstrap(const ScanFrame& frame) {
  double t = frame.base_timestamp;
  double anchor = content_anchor(frame);
  map_.integrate_scan(frame.points, SE3(), frame.scan_id);
  window_.push_back({frame.scan_id, anchor, build_scan_map(frame), frame.points});
  window_origin_time_ = t;
  double dt = std::max(2.0 * cfg_.t_pred, 0.2);
  spline_ = TrajectorySpline::constant(cfg_.spline_order, t, dt, SE3());
  last_keyframe_world_ = map_.map_pose().translation;

  ScanDiagnostics d;
  d.scan_id = frame.scan_id;
  d.timestamp = t;
  d.keyframed = true;
  for (int l = 0; l < map_.num_levels(); ++l) d.map_cells += map_.level(l).cell_count();
  diags_.push_back(d);

  PoseEstimate out;
  out.timestamp = t;
  out.world_pose = map_.map_pose();
  out.predicted_timestamp = t + cfg_.t_pred;
  out.predicted_world_pose = map_.map_pose() * spline_->evaluate_unchecked(out.predicted_timestamp);
  return out;
}

PoseEstimate OdometryPipeline::process_scan(const ScanFrame& frame) {
  double t = frame.base_timestamp;
  if (window_.empty()) {
    last_timestamp_ = t;
    return bootstrap(frame);
  }
  if (!(t > last_timestamp_))
    throw std::invalid_argument("scan timestamps must strictly increase");
  last_timestamp_ = t;

  ScanDiagnostics d;
  d.scan_id = frame.scan_id;
  d.timestamp = t;

  double anchor = content_anchor(frame);
  window_.push_back({frame.scan_id, anchor, build_scan_map(frame), frame.points});
  if (window_.size() > static_cast<std::size_t>(cfg_.window_scans)) {
    window_origin_time_ = window_.front().timestamp;
    window_.pop_front();
  }

  // re-fit the spline over the new segment through the previous solution's
  // poses; the newest scan enters at the old spline's own extrapolation
  double new_t0 = window_origin_time_;
  double new_dt = anchor + cfg_.t_pred - new_t0;
  std::vector<std::pair<double, SE3>> samples;
  samples.reserve(window_.size());
  for (const WindowEntry& e : window_)
    samples.emplace_back(e.timestamp, spline_->evaluate_unchecked(e.timestamp));
  spline_ = reinit_after_shift(*spline_, samples, new_t0, new_dt).spline;

  std::vector<WindowScanRef> refs;
  refs.reserve(window_.size());
  for (const WindowEntry& e : window_) refs.push_back({e.scan_id, e.timestamp, &e.scan_map});

  auto clock_start = std::chrono::steady_clock::now();
  RegistrationResult reg = register_window(refs, *spline_, map_, cfg_.reg, cfg_.select);
  d.registration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();

  if (std::getenv("MARS_TRACE") != nullptr) {
    for (std::size_t i = 0; i < reg.iterations.size(); ++i) {
      const EmIteration& it = reg.iterations[i];
      std::fprintf(stderr,
                   "  em=%zu cost %.4f -> %.4f lm=%d nll=%.3f step_t=%.4f step_r=%.5f "
                   "matched=%zu/%zu outlier=%.3f\n",
                   i, it.cost_initial, it.cost_final, it.lm_iterations, it.neg_log_likelihood,
                   it.step_translation, it.step_rotation, it.matched, it.associations,
                   it.outlier_mass);
    }
    for (const WindowEntry& e : window_) {
      SE3 est = spline_->evaluate_unchecked(e.timestamp);
      Vec3 rpy = est.rotation.log();
      std::fprintf(stderr, "  pose(%.1f) = %.4f %.4f %.4f | r %.4f %.4f %.4f\n", e.timestamp,
                   est.translation.x(), est.translation.y(), est.translation.z(), rpy.x(),
                   rpy.y(), rpy.z());
    }
  }

  d.em_iterations = reg.em_iterations;
  d.scan_surfels = reg.scan_surfels;
  d.degenerate = reg.degenerate;
  d.unconstrained = reg.unconstrained;
  if (!reg.iterations.empty()) {
    d.final_cost = reg.iterations.back().cost_final;
    d.outlier_mass = reg.iterations.back().outlier_mass;
  }
  for (std::size_t i = 1; i < reg.iterations.size(); ++i) {
    double prev = reg.iterations[i - 1].neg_log_likelihood;
    if (reg.iterations[i].neg_log_likelihood > prev + 1e-9 * (1.0 + std::abs(prev)))
      d.nll_monotone = false;
  }

  SE3 local = spline_->evaluate_unchecked(t);
  SE3 local_anchor = spline_->evaluate_unchecked(anchor);
  SE3 world = map_.map_pose() * local;
  SE3 world_pred = map_.map_pose() * spline_->evaluate_unchecked(t + cfg_.t_pred);

  if ((world.translation - last_keyframe_world_).norm() > cfg_.map.keyframe_distance) {
    map_.integrate_scan(frame.points, local_anchor, frame.scan_id);
    map_.enforce_window();
    last_keyframe_world_ = world.translation;
    d.keyframed = true;
  }

  std::array<int, 3> s = map_.maybe_shift(local_anchor);
  if (s[0] != 0 || s[1] != 0 || s[2] != 0) {
    double q = map_.shift_quantum();
    spline_ = spline_->translated(Vec3(-s[0] * q, -s[1] * q, -s[2] * q));
    d.shift = s;
  }

  for (int l = 0; l < map_.num_levels(); ++l) d.map_cells += map_.level(l).cell_count();
  diags_.push_back(d);

  PoseEstimate out;
  out.timestamp = t;
  out.world_pose = world;
  out.predicted_timestamp = t + cfg_.t_pred;
  out.predicted_world_pose = world_pred;
  out.low_confidence = reg.unconstrained;
  return out;
}

}  // namespace mars
