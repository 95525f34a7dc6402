#include "mars/kernels/kernels.hpp"

#include <cmath>

namespace mars::kernels {

namespace {

void transform_points_scalar(std::size_t n, const double* R, const double* t,
                             const double* xs, const double* ys, const double* zs,
                             double* ox, double* oy, double* oz) {
  for (std::size_t i = 0; i < n; ++i) {
    const double px = xs[i], py = ys[i], pz = zs[i];
    ox[i] = std::fma(R[0], px, std::fma(R[1], py, std::fma(R[2], pz, t[0])));
    oy[i] = std::fma(R[3], px, std::fma(R[4], py, std::fma(R[5], pz, t[1])));
    oz[i] = std::fma(R[6], px, std::fma(R[7], py, std::fma(R[8], pz, t[2])));
  }
}

void voxel_indices_scalar(std::size_t n, double spacing, const double* xs,
                          const double* ys, const double* zs, std::int32_t* ix,
                          std::int32_t* iy, std::int32_t* iz) {
  for (std::size_t i = 0; i < n; ++i) {
    ix[i] = static_cast<std::int32_t>(std::floor(xs[i] / spacing));
    iy[i] = static_cast<std::int32_t>(std::floor(ys[i] / spacing));
    iz[i] = static_cast<std::int32_t>(std::floor(zs[i] / spacing));
  }
}

void centered_moments_scalar(std::size_t n, const double* c, const double* xs,
                             const double* ys, const double* zs, double* sum,
                             double* outer) {
  double sx = 0, sy = 0, sz = 0;
  double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - c[0], dy = ys[i] - c[1], dz = zs[i] - c[2];
    sx += dx;
    sy += dy;
    sz += dz;
    xx += dx * dx;
    xy += dx * dy;
    xz += dx * dz;
    yy += dy * dy;
    yz += dy * dz;
    zz += dz * dz;
  }
  sum[0] = sx;
  sum[1] = sy;
  sum[2] = sz;
  outer[0] = xx;
  outer[1] = xy;
  outer[2] = xz;
  outer[3] = yy;
  outer[4] = yz;
  outer[5] = zz;
}

}  // namespace

const Table& scalar_table() {
  static const Table table{"scalar", transform_points_scalar, voxel_indices_scalar,
                           centered_moments_scalar};
  return table;
}

}  // namespace mars::kernels
