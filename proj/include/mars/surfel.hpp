#pragma once

#include <cstdint>

#include "mars/types.hpp"

namespace mars {

inline constexpr std::uint32_t kMinSurfelPoints = 10;

/// Incremental first/second moments of points, stored as offsets from a fixed
/// reference center to keep the sums small.
struct SurfelAccumulator {
  Vec3 reference_center = Vec3::Zero();
  Vec3 sum = Vec3::Zero();
  Mat3 outer = Mat3::Zero();
  std::uint32_t count = 0;

  explicit SurfelAccumulator(const Vec3& center = Vec3::Zero()) : reference_center(center) {}

  void add(const Vec3& p);

  /// Batch add through the active kernel table.
  void add_points(std::size_t n, const double* xs, const double* ys, const double* zs);

  /// Fold `other` into this accumulator. Statistics are translated when the
  /// reference centers differ, so merging is exact for integer-valued points.
  void merge(const SurfelAccumulator& other);

  Vec3 mean() const { return reference_center + sum / static_cast<double>(count); }

  /// Population covariance (1/count normalizer).
  Mat3 covariance() const;
};

struct Surfel {
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Zero();
  Vec3 normal = Vec3::UnitZ();
  Vec3 view_direction = Vec3::UnitZ();  // unit vector from sensor toward mean
  Vec3 eigenvalues = Vec3::Zero();      // ascending
  std::uint32_t count = 0;
  bool valid = false;
};

/// Plane fit of the accumulated points. The normal is the eigenvector of the
/// smallest covariance eigenvalue, oriented to face the sensor
/// (normal . (origin - mean) >= 0). Valid surfels need at least
/// kMinSurfelPoints points and both larger eigenvalues above a relative floor
/// of 1e-9 * trace.
Surfel finalize(const SurfelAccumulator& acc, const Vec3& sensor_origin);

/// Same fit with the view direction supplied directly (used for combined
/// surfels whose view direction is a count-weighted average over scans).
Surfel finalize_with_view(const SurfelAccumulator& acc, const Vec3& view_direction);

}  // namespace mars
