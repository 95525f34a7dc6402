#include "mars/surfel.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

#include "mars/kernels/kernels.hpp"

namespace mars {

void SurfelAccumulator::add(const Vec3& p) {
  const Vec3 d = p - reference_center;
  sum += d;
  outer += d * d.transpose();
  ++count;
}

void SurfelAccumulator::add_points(std::size_t n, const double* xs, const double* ys,
                                   const double* zs) {
  if (n == 0) return;
  double s[3];
  double o[6];
  kernels::active().centered_moments(n, reference_center.data(), xs, ys, zs, s, o);
  sum += Vec3(s[0], s[1], s[2]);
  Mat3 m;
  m << o[0], o[1], o[2], o[1], o[3], o[4], o[2], o[4], o[5];
  outer += m;
  count += static_cast<std::uint32_t>(n);
}

void SurfelAccumulator::merge(const SurfelAccumulator& other) {
  if (other.count == 0) return;
  const Vec3 d = other.reference_center - reference_center;
  if (d.isZero(0.0)) {
    sum += other.sum;
    outer += other.outer;
  } else {
    // offsets against the other center become offset + d against ours
    const double n = static_cast<double>(other.count);
    sum += other.sum + n * d;
    outer += other.outer + d * other.sum.transpose() + other.sum * d.transpose() +
             n * d * d.transpose();
  }
  count += other.count;
}

Mat3 SurfelAccumulator::covariance() const {
  const double n = static_cast<double>(count);
  const Vec3 m = sum / n;
  Mat3 c = outer / n - m * m.transpose();
  return 0.5 * (c + c.transpose());
}

namespace {

Surfel finalize_core(const SurfelAccumulator& acc) {
  Surfel s;
  s.count = acc.count;
  if (acc.count == 0) {
    s.mean = acc.reference_center;
    return s;
  }
  s.mean = acc.mean();
  s.covariance = acc.covariance();

  Eigen::SelfAdjointEigenSolver<Mat3> es(s.covariance);
  s.eigenvalues = es.eigenvalues();
  s.normal = es.eigenvectors().col(0);

  const double floor = 1e-9 * s.covariance.trace();
  s.valid = acc.count >= kMinSurfelPoints && s.eigenvalues[1] > floor &&
            s.eigenvalues[2] > floor;
  return s;
}

}  // namespace

Surfel finalize(const SurfelAccumulator& acc, const Vec3& sensor_origin) {
  Surfel s = finalize_core(acc);
  if (acc.count == 0) return s;

  Vec3 view = s.mean - sensor_origin;
  const double norm = view.norm();
  s.view_direction = norm > 1e-12 ? Vec3(view / norm) : Vec3::UnitZ();
  if (s.normal.dot(sensor_origin - s.mean) < 0.0) s.normal = -s.normal;
  return s;
}

Surfel finalize_with_view(const SurfelAccumulator& acc, const Vec3& view_direction) {
  Surfel s = finalize_core(acc);
  if (acc.count == 0) return s;

  s.view_direction = view_direction;
  if (s.normal.dot(view_direction) > 0.0) s.normal = -s.normal;
  return s;
}

}  // namespace mars
