#pragma once

#include <Eigen/Geometry>

#include "mars/types.hpp"

namespace mars {

Mat3 skew(const Vec3& w);

/// Rotation stored as a unit quaternion, with matrix and quaternion views.
class SO3 {
 public:
  SO3() : q_(1.0, 0.0, 0.0, 0.0) {}
  explicit SO3(const Eigen::Quaterniond& q) : q_(q.normalized()) {}
  explicit SO3(const Mat3& R) : q_(R) { q_.normalize(); }

  /// Rodrigues map. Angles below 1e-8 rad use the second-order series of the
  /// half-angle terms so the result degrades gracefully to I + skew(w).
  static SO3 exp(const Vec3& w);

  /// Principal logarithm, ||log()|| <= pi. At exactly pi the axis sign is
  /// fixed so that its first nonzero component is positive.
  Vec3 log() const;

  Mat3 matrix() const { return q_.toRotationMatrix(); }
  const Eigen::Quaterniond& quat() const { return q_; }

  SO3 inverse() const { return SO3(q_.conjugate()); }
  SO3 operator*(const SO3& rhs) const { return SO3(q_ * rhs.q_); }
  Vec3 operator*(const Vec3& v) const { return q_ * v; }

 private:
  Eigen::Quaterniond q_;
};

/// Rigid transform acting as R * p + t.
struct SE3 {
  SO3 rotation;
  Vec3 translation = Vec3::Zero();

  SE3() = default;
  SE3(const SO3& R, const Vec3& t) : rotation(R), translation(t) {}

  Vec3 operator*(const Vec3& p) const { return rotation * p + translation; }

  SE3 operator*(const SE3& rhs) const {
    return SE3(rotation * rhs.rotation, rotation * rhs.translation + translation);
  }

  SE3 inverse() const {
    SO3 ri = rotation.inverse();
    return SE3(ri, -(ri * translation));
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation.matrix();
    m.topRightCorner<3, 1>() = translation;
    return m;
  }

  static SE3 from_translation(const Vec3& t) { return SE3(SO3(), t); }
};

}  // namespace mars
