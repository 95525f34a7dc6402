#pragma once

#include <cstddef>
#include <cstdint>

namespace mars::kernels {

/// Batch kernels over structure-of-arrays point data. Each entry has a scalar
/// reference implementation and (on capable x86 hosts) an AVX2 variant; the
/// active table is chosen once at startup. transform_points and voxel_indices
/// are bit-identical across variants (per-lane math only); centered_moments
/// reduces in a different order under AVX2 and may differ by rounding.
struct Table {
  const char* name;

  // out = R * p + t, R row-major. Output arrays may alias the inputs.
  void (*transform_points)(std::size_t n, const double* R, const double* t,
                           const double* xs, const double* ys, const double* zs,
                           double* ox, double* oy, double* oz);

  // Componentwise floor(p / spacing). Cells are half-open: a point exactly on
  // a boundary lands in the higher cell.
  void (*voxel_indices)(std::size_t n, double spacing, const double* xs,
                        const double* ys, const double* zs, std::int32_t* ix,
                        std::int32_t* iy, std::int32_t* iz);

  // First and second moments of (p - c): sum (3) and the upper triangle of
  // sum of outer products (6: xx, xy, xz, yy, yz, zz).
  void (*centered_moments)(std::size_t n, const double* c, const double* xs,
                           const double* ys, const double* zs, double* sum,
                           double* outer);
};

const Table& scalar_table();

/// nullptr when AVX2+FMA is unavailable at build or run time.
const Table* avx2_table();

/// Runtime-selected table. Honors MARS_KERNELS=scalar|avx2 (falls back to
/// scalar with a warning when a forced variant is unavailable).
const Table& active();

}  // namespace mars::kernels
