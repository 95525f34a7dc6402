#include "mars/lie.hpp"

#include <algorithm>
#include <cmath>

namespace mars {

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(), w.z(), 0.0, -w.x(), -w.y(), w.x(), 0.0;
  return m;
}

SO3 SO3::exp(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const double theta = std::sqrt(theta2);
  double scalar, vec_scale;  // cos(theta/2), sin(theta/2)/theta
  if (theta < 1e-8) {
    scalar = 1.0 - theta2 / 8.0;
    vec_scale = 0.5 - theta2 / 48.0;
  } else {
    scalar = std::cos(0.5 * theta);
    vec_scale = std::sin(0.5 * theta) / theta;
  }
  Eigen::Quaterniond q(scalar, vec_scale * w.x(), vec_scale * w.y(), vec_scale * w.z());
  return SO3(q);
}

Vec3 SO3::log() const {
  const Mat3 R = matrix();
  // vee(R - R^T) = 2 sin(theta) * axis
  const Vec3 axial(R(2, 1) - R(1, 2), R(0, 2) - R(2, 0), R(1, 0) - R(0, 1));
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double s = 0.5 * axial.norm();
  const double theta = std::atan2(s, c);

  if (theta < 1e-8) {
    // theta/(2 sin theta) ~ 1/2 * (1 + theta^2/6)
    return 0.5 * (1.0 + theta * theta / 6.0) * axial;
  }
  if (c > -0.999) {
    return (theta / (2.0 * std::sin(theta))) * axial;
  }

  // Near pi the axial part cancels; recover the axis from the symmetric part.
  // R_ii = c + (1 - c) a_i^2, (R_ij + R_ji)/2 = (1 - c) a_i a_j.
  int i = 0;
  if (R(1, 1) > R(i, i)) i = 1;
  if (R(2, 2) > R(i, i)) i = 2;
  const double one_minus_c = 1.0 - c;
  Vec3 a = Vec3::Zero();
  a[i] = std::sqrt(std::max(0.0, (R(i, i) - c) / one_minus_c));
  for (int j = 0; j < 3; ++j) {
    if (j != i) a[j] = (R(i, j) + R(j, i)) / (2.0 * one_minus_c * a[i]);
  }
  a.normalize();

  if (axial.norm() > 1e-9) {
    if (a.dot(axial) < 0.0) a = -a;
  } else {
    // Angle is pi up to roundoff: both signs reproduce R, pick the one whose
    // first nonzero component is positive.
    for (int j = 0; j < 3; ++j) {
      if (std::abs(a[j]) > 1e-6) {
        if (a[j] < 0.0) a = -a;
        break;
      }
    }
  }
  return theta * a;
}

}  // namespace mars
