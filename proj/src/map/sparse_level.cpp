#include "mars/map/sparse_level.hpp"

#include <cmath>

#include "mars/kernels/kernels.hpp"

namespace mars {

SurfelAccumulator Cell::merged_accumulator() const {
  SurfelAccumulator m;
  if (!per_scan.empty()) m.reference_center = per_scan.front().acc.reference_center;
  for (const auto& e : per_scan) m.merge(e.acc);
  return m;
}

Vec3 Cell::weighted_view_direction() const {
  Vec3 acc = Vec3::Zero();
  Vec3 newest = Vec3::UnitZ();
  for (const auto& e : per_scan) {
    Vec3 v = e.acc.mean() - e.origin;
    const double n = v.norm();
    newest = n > 1e-12 ? Vec3(v / n) : Vec3::UnitZ();
    if (n > 1e-12) acc += static_cast<double>(e.acc.count) * (v / n);
  }
  const double n = acc.norm();
  return n > 1e-12 ? Vec3(acc / n) : newest;
}

CellKey SparseLevel::key_of(const Vec3& p) const {
  return backend_ == Backend::kGrid ? grid_key(p, spacing_) : lattice_key(p, spacing_);
}

Vec3 SparseLevel::center_of(const CellKey& k) const {
  return backend_ == Backend::kGrid ? grid_center(k, spacing_) : lattice_center(k, spacing_);
}

void SparseLevel::neighbors(const CellKey& k, std::vector<CellKey>& out) const {
  if (backend_ == Backend::kGrid) {
    grid_neighbors(k, out);
  } else {
    lattice_neighbors(k, out);
  }
}

std::vector<CellKey> SparseLevel::insert_points(std::size_t n, const double* xs,
                                                const double* ys, const double* zs,
                                                std::uint32_t scan_id, const Vec3& origin) {
  std::vector<CellKey> touched;
  if (n == 0) return touched;

  std::vector<CellKey> keys(n);
  if (backend_ == Backend::kGrid) {
    kx_.resize(n);
    ky_.resize(n);
    kz_.resize(n);
    kernels::active().voxel_indices(n, spacing_, xs, ys, zs, kx_.data(), ky_.data(), kz_.data());
    for (std::size_t i = 0; i < n; ++i) keys[i] = CellKey{{kx_[i], ky_[i], kz_[i], 0}};
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      keys[i] = lattice_key(Vec3(xs[i], ys[i], zs[i]), spacing_);
    }
  }

  // Scan order is spatially coherent, so accumulate runs of equal keys in one
  // batched moment update per run.
  std::unordered_map<CellKey, bool, CellKeyHash> seen;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && keys[j] == keys[i]) ++j;

    Cell& cell = cells_[keys[i]];
    ScanSurfel* entry = nullptr;
    for (auto it = cell.per_scan.rbegin(); it != cell.per_scan.rend(); ++it) {
      if (it->scan_id == scan_id) {
        entry = &*it;
        break;
      }
    }
    if (entry == nullptr) {
      cell.per_scan.push_back(ScanSurfel{scan_id, origin,
                                         SurfelAccumulator(center_of(keys[i]))});
      entry = &cell.per_scan.back();
    }
    entry->acc.add_points(j - i, xs + i, ys + i, zs + i);
    cell.dirty = true;
    if (seen.emplace(keys[i], true).second) touched.push_back(keys[i]);
    i = j;
  }
  return touched;
}

std::int64_t SparseLevel::remove_scan(std::uint32_t scan_id) {
  std::int64_t removed = 0;
  for (auto it = cells_.begin(); it != cells_.end();) {
    Cell& cell = it->second;
    for (auto e = cell.per_scan.begin(); e != cell.per_scan.end();) {
      if (e->scan_id == scan_id) {
        removed += e->acc.count;
        e = cell.per_scan.erase(e);
        cell.dirty = true;
      } else {
        ++e;
      }
    }
    if (cell.per_scan.empty()) {
      it = cells_.erase(it);
    } else {
      ++it;
    }
  }
  return removed;
}

void SparseLevel::recompute_combined() {
  for (auto& [key, cell] : cells_) {
    if (!cell.dirty) continue;
    cell.combined = finalize_with_view(cell.merged_accumulator(), cell.weighted_view_direction());
    cell.dirty = false;
  }
}

std::int64_t SparseLevel::shift_keys(const std::array<std::int32_t, 4>& key_offset,
                                     const Vec3& delta, double survival_bound) {
  std::unordered_map<CellKey, Cell, CellKeyHash> shifted;
  shifted.reserve(cells_.size());
  std::int64_t dropped = 0;

  for (auto& [key, cell] : cells_) {
    CellKey nk;
    for (int i = 0; i < 4; ++i) nk.v[i] = key.v[i] - key_offset[i];
    const Vec3 center = center_of(nk);
    if (center.lpNorm<Eigen::Infinity>() > survival_bound) {
      for (const auto& e : cell.per_scan) dropped += e.acc.count;
      continue;
    }
    for (auto& e : cell.per_scan) {
      e.acc.reference_center = center;
      e.origin -= delta;
    }
    cell.combined.mean -= delta;
    shifted.emplace(nk, std::move(cell));
  }

  cells_ = std::move(shifted);
  return dropped;
}

const Cell* SparseLevel::find(const CellKey& k) const {
  auto it = cells_.find(k);
  return it == cells_.end() ? nullptr : &it->second;
}

std::int64_t SparseLevel::point_count() const {
  std::int64_t total = 0;
  for (const auto& [key, cell] : cells_) {
    for (const auto& e : cell.per_scan) total += e.acc.count;
  }
  return total;
}

}  // namespace mars
