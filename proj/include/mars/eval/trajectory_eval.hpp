#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "mars/lie.hpp"

namespace mars {

struct TimedPose {
  double t = 0.0;
  SE3 pose;
};

using Trajectory = std::vector<TimedPose>;

/// Greedy nearest-timestamp pairing of estimate records to ground-truth
/// records. Both inputs must be strictly increasing in time; each ground-truth
/// record is used at most once, and pairs further apart than max_dt are
/// dropped. Returns (estimate index, ground-truth index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& estimate,
                                                           const Trajectory& ground_truth,
                                                           double max_dt);

struct AteResult {
  double rmse = 0.0;
  std::size_t pairs = 0;
  bool degenerate = false;  // too few or (nearly) collinear positions
  SE3 alignment;            // rigid transform applied to the estimate
};

/// Absolute trajectory error: position RMSE after the optimal rigid (no
/// scale) alignment of the associated estimate positions onto ground truth.
/// Throws std::runtime_error when no pairs associate.
AteResult ate_rmse(const Trajectory& estimate, const Trajectory& ground_truth, double max_dt);

}  // namespace mars
