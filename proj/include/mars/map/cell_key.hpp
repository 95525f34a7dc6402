#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mars/types.hpp"

namespace mars {

enum class Backend { kGrid, kLattice };

/// Sparse cell address. Grid keys use v[0..2] (voxel indices, v[3] = 0);
/// lattice keys use all four coordinates, which sum to zero.
struct CellKey {
  std::array<std::int32_t, 4> v{0, 0, 0, 0};

  bool operator==(const CellKey& o) const { return v == o.v; }
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (std::int32_t c : k.v) {
      h ^= static_cast<std::uint32_t>(c) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
      h *= 0xbf58476d1ce4e5b9ull;
      h ^= h >> 27;
    }
    return static_cast<std::size_t>(h);
  }
};

// ---- voxel grid ----

CellKey grid_key(const Vec3& p, double spacing);
Vec3 grid_center(const CellKey& k, double spacing);

/// Self plus the 26 face/edge/corner neighbors.
void grid_neighbors(const CellKey& k, std::vector<CellKey>& out);

// ---- permutohedral lattice (d = 3) ----
//
// Points embed isometrically onto the zero-sum hyperplane in R^4, scaled so
// adjacent vertices sit `spacing` apart. Vertex keys are integer 4-vectors
// summing to zero with all components congruent modulo 4. The embedding basis
// is chosen so the three orthogonal cube axes of the lattice (period
// 2 * spacing / sqrt(3)) have integer key offsets, which makes whole-cell map
// shifting exact for this backend too.

Vec4 lattice_embed(const Vec3& p, double spacing);
Vec3 lattice_unembed(const Vec4& y, double spacing);

/// Nearest lattice vertex to p: per congruence class the nearest zero-sum
/// representative is found by rounding plus rank repair, then the closest of
/// the four candidates wins.
CellKey lattice_key(const Vec3& p, double spacing);
Vec3 lattice_center(const CellKey& k, double spacing);

/// Self plus the 2*(d+1) = 8 nearest vertices.
void lattice_neighbors(const CellKey& k, std::vector<CellKey>& out);

/// Key offset for an integer shift (in cube periods) along the three axes.
std::array<std::int32_t, 4> lattice_axis_offset(int sx, int sy, int sz);

/// World-space period of one axis step: 2 * spacing / sqrt(3).
double lattice_axis_period(double spacing);

}  // namespace mars
