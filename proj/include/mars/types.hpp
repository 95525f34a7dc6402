#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mars {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

/// Structure-of-arrays point set. Coordinates are kept in separate contiguous
/// arrays so the batch kernels can run over them directly; t holds the
/// per-point time offset relative to the owning scan's base timestamp.
struct PointCloud {
  std::vector<double> x, y, z, t;

  std::size_t size() const { return x.size(); }
  bool empty() const { return x.empty(); }

  void reserve(std::size_t n) {
    x.reserve(n);
    y.reserve(n);
    z.reserve(n);
    t.reserve(n);
  }

  void add(const Vec3& p, double t_offset = 0.0) {
    x.push_back(p.x());
    y.push_back(p.y());
    z.push_back(p.z());
    t.push_back(t_offset);
  }

  Vec3 point(std::size_t i) const { return Vec3(x[i], y[i], z[i]); }

  void clear() {
    x.clear();
    y.clear();
    z.clear();
    t.clear();
  }
};

/// One sensor revolution worth of points in the sensor frame.
struct ScanFrame {
  std::uint32_t scan_id = 0;
  double base_timestamp = 0.0;
  PointCloud points;
};

}  // namespace mars
