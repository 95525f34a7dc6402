#include "mars/kernels/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace mars::kernels {

namespace {

// Same fma nesting as the scalar kernel, so results match bit for bit.
void transform_points_avx2(std::size_t n, const double* R, const double* t,
                           const double* xs, const double* ys, const double* zs,
                           double* ox, double* oy, double* oz) {
  const __m256d r0 = _mm256_set1_pd(R[0]), r1 = _mm256_set1_pd(R[1]), r2 = _mm256_set1_pd(R[2]);
  const __m256d r3 = _mm256_set1_pd(R[3]), r4 = _mm256_set1_pd(R[4]), r5 = _mm256_set1_pd(R[5]);
  const __m256d r6 = _mm256_set1_pd(R[6]), r7 = _mm256_set1_pd(R[7]), r8 = _mm256_set1_pd(R[8]);
  const __m256d t0 = _mm256_set1_pd(t[0]), t1 = _mm256_set1_pd(t[1]), t2 = _mm256_set1_pd(t[2]);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d px = _mm256_loadu_pd(xs + i);
    const __m256d py = _mm256_loadu_pd(ys + i);
    const __m256d pz = _mm256_loadu_pd(zs + i);
    _mm256_storeu_pd(ox + i, _mm256_fmadd_pd(r0, px, _mm256_fmadd_pd(r1, py, _mm256_fmadd_pd(r2, pz, t0))));
    _mm256_storeu_pd(oy + i, _mm256_fmadd_pd(r3, px, _mm256_fmadd_pd(r4, py, _mm256_fmadd_pd(r5, pz, t1))));
    _mm256_storeu_pd(oz + i, _mm256_fmadd_pd(r6, px, _mm256_fmadd_pd(r7, py, _mm256_fmadd_pd(r8, pz, t2))));
  }
  if (i < n) {
    scalar_table().transform_points(n - i, R, t, xs + i, ys + i, zs + i, ox + i, oy + i, oz + i);
  }
}

void voxel_indices_avx2(std::size_t n, double spacing, const double* xs,
                        const double* ys, const double* zs, std::int32_t* ix,
                        std::int32_t* iy, std::int32_t* iz) {
  const __m256d s = _mm256_set1_pd(spacing);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    // cvtpd rounds to nearest, which is exact on the already-floored value
    const __m256d fx = _mm256_floor_pd(_mm256_div_pd(_mm256_loadu_pd(xs + i), s));
    const __m256d fy = _mm256_floor_pd(_mm256_div_pd(_mm256_loadu_pd(ys + i), s));
    const __m256d fz = _mm256_floor_pd(_mm256_div_pd(_mm256_loadu_pd(zs + i), s));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(ix + i), _mm256_cvtpd_epi32(fx));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(iy + i), _mm256_cvtpd_epi32(fy));
    _mm_storeu_si128(reinterpret_cast<__m128i*>(iz + i), _mm256_cvtpd_epi32(fz));
  }
  if (i < n) {
    scalar_table().voxel_indices(n - i, spacing, xs + i, ys + i, zs + i, ix + i, iy + i, iz + i);
  }
}

double hsum(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
}

void centered_moments_avx2(std::size_t n, const double* c, const double* xs,
                           const double* ys, const double* zs, double* sum,
                           double* outer) {
  const __m256d cx = _mm256_set1_pd(c[0]), cy = _mm256_set1_pd(c[1]), cz = _mm256_set1_pd(c[2]);
  __m256d sx = _mm256_setzero_pd(), sy = _mm256_setzero_pd(), sz = _mm256_setzero_pd();
  __m256d xx = _mm256_setzero_pd(), xy = _mm256_setzero_pd(), xz = _mm256_setzero_pd();
  __m256d yy = _mm256_setzero_pd(), yz = _mm256_setzero_pd(), zz = _mm256_setzero_pd();

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(xs + i), cx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(ys + i), cy);
    const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(zs + i), cz);
    sx = _mm256_add_pd(sx, dx);
    sy = _mm256_add_pd(sy, dy);
    sz = _mm256_add_pd(sz, dz);
    xx = _mm256_fmadd_pd(dx, dx, xx);
    xy = _mm256_fmadd_pd(dx, dy, xy);
    xz = _mm256_fmadd_pd(dx, dz, xz);
    yy = _mm256_fmadd_pd(dy, dy, yy);
    yz = _mm256_fmadd_pd(dy, dz, yz);
    zz = _mm256_fmadd_pd(dz, dz, zz);
  }

  double tail_sum[3] = {0, 0, 0};
  double tail_outer[6] = {0, 0, 0, 0, 0, 0};
  if (i < n) {
    scalar_table().centered_moments(n - i, c, xs + i, ys + i, zs + i, tail_sum, tail_outer);
  }

  sum[0] = hsum(sx) + tail_sum[0];
  sum[1] = hsum(sy) + tail_sum[1];
  sum[2] = hsum(sz) + tail_sum[2];
  outer[0] = hsum(xx) + tail_outer[0];
  outer[1] = hsum(xy) + tail_outer[1];
  outer[2] = hsum(xz) + tail_outer[2];
  outer[3] = hsum(yy) + tail_outer[3];
  outer[4] = hsum(yz) + tail_outer[4];
  outer[5] = hsum(zz) + tail_outer[5];
}

}  // namespace

const Table* avx2_table() {
  static const Table table{"avx2", transform_points_avx2, voxel_indices_avx2,
                           centered_moments_avx2};
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &table : nullptr;
}

}  // namespace mars::kernels

#else

namespace mars::kernels {

const Table* avx2_table() { return nullptr; }

}  // namespace mars::kernels

#endif
