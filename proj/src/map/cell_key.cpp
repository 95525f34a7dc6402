#include "mars/map/cell_key.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mars {

CellKey grid_key(const Vec3& p, double spacing) {
  CellKey k;
  k.v[0] = static_cast<std::int32_t>(std::floor(p.x() / spacing));
  k.v[1] = static_cast<std::int32_t>(std::floor(p.y() / spacing));
  k.v[2] = static_cast<std::int32_t>(std::floor(p.z() / spacing));
  return k;
}

Vec3 grid_center(const CellKey& k, double spacing) {
  return Vec3((k.v[0] + 0.5) * spacing, (k.v[1] + 0.5) * spacing, (k.v[2] + 0.5) * spacing);
}

void grid_neighbors(const CellKey& k, std::vector<CellKey>& out) {
  out.clear();
  out.reserve(27);
  for (int dz = -1; dz <= 1; ++dz) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        CellKey n = k;
        n.v[0] += dx;
        n.v[1] += dy;
        n.v[2] += dz;
        out.push_back(n);
      }
    }
  }
}

namespace {

// Orthonormal basis of the zero-sum hyperplane, columns scaled so that the
// lattice's cube axes map to the integer offsets (2,2,-2,-2), (2,-2,2,-2),
// (2,-2,-2,2).
constexpr double kE[4][3] = {
    {0.5, 0.5, 0.5},
    {0.5, -0.5, -0.5},
    {-0.5, 0.5, -0.5},
    {-0.5, -0.5, 0.5},
};

const double kScale = 2.0 * std::sqrt(3.0);  // embedded distance between adjacent vertices

// Nearest integer 4-vector to w with component sum `target`.
std::array<std::int64_t, 4> round_to_sum(const Vec4& w, std::int64_t target) {
  std::array<std::int64_t, 4> f;
  Vec4 rem;
  std::int64_t total = 0;
  for (int i = 0; i < 4; ++i) {
    f[i] = std::llround(w[i]);
    rem[i] = w[i] - static_cast<double>(f[i]);
    total += f[i];
  }
  std::int64_t excess = total - target;
  if (excess == 0) return f;

  std::array<int, 4> idx{0, 1, 2, 3};
  if (excess > 0) {
    // decrement the coordinates rounded up the furthest
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return rem[a] < rem[b]; });
    for (std::int64_t j = 0; j < excess; ++j) f[idx[j % 4]] -= 1;
  } else {
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return rem[a] > rem[b]; });
    for (std::int64_t j = 0; j < -excess; ++j) f[idx[j % 4]] += 1;
  }
  return f;
}

}  // namespace

Vec4 lattice_embed(const Vec3& p, double spacing) {
  const double s = kScale / spacing;
  Vec4 y;
  for (int i = 0; i < 4; ++i) {
    y[i] = s * (kE[i][0] * p.x() + kE[i][1] * p.y() + kE[i][2] * p.z());
  }
  return y;
}

Vec3 lattice_unembed(const Vec4& y, double spacing) {
  const double s = spacing / kScale;
  Vec3 p;
  for (int j = 0; j < 3; ++j) {
    p[j] = s * (kE[0][j] * y[0] + kE[1][j] * y[1] + kE[2][j] * y[2] + kE[3][j] * y[3]);
  }
  return p;
}

CellKey lattice_key(const Vec3& p, double spacing) {
  const Vec4 y = lattice_embed(p, spacing);

  CellKey best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int cls = 0; cls < 4; ++cls) {
    const Vec4 w = (y - Vec4::Constant(cls)) / 4.0;
    const auto m = round_to_sum(w, -cls);
    CellKey cand;
    double d2 = 0.0;
    for (int i = 0; i < 4; ++i) {
      cand.v[i] = static_cast<std::int32_t>(cls + 4 * m[i]);
      const double diff = y[i] - cand.v[i];
      d2 += diff * diff;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = cand;
    }
  }
  return best;
}

Vec3 lattice_center(const CellKey& k, double spacing) {
  return lattice_unembed(Vec4(k.v[0], k.v[1], k.v[2], k.v[3]), spacing);
}

void lattice_neighbors(const CellKey& k, std::vector<CellKey>& out) {
  out.clear();
  out.reserve(9);
  out.push_back(k);
  for (int i = 0; i < 4; ++i) {
    for (int sign = -1; sign <= 1; sign += 2) {
      CellKey n = k;
      for (int j = 0; j < 4; ++j) n.v[j] += sign * (j == i ? 3 : -1);
      out.push_back(n);
    }
  }
}

std::array<std::int32_t, 4> lattice_axis_offset(int sx, int sy, int sz) {
  // sx*u + sy*v + sz*w with u=(2,2,-2,-2), v=(2,-2,2,-2), w=(2,-2,-2,2);
  // these are 4x the embedding columns, so an axis step of one cube period
  // lands exactly on these lattice vectors.
  return {static_cast<std::int32_t>(2 * (sx + sy + sz)),
          static_cast<std::int32_t>(2 * (sx - sy - sz)),
          static_cast<std::int32_t>(2 * (-sx + sy - sz)),
          static_cast<std::int32_t>(2 * (-sx - sy + sz))};
}

double lattice_axis_period(double spacing) { return 2.0 * spacing / std::sqrt(3.0); }

}  // namespace mars
