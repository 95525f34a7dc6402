#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "mars/map/cell_key.hpp"
#include "mars/surfel.hpp"

namespace mars {

/// Per-scan contribution to a cell. Entries are stacked newest-last; points of
/// a scan only ever fuse into that scan's own entry.
struct ScanSurfel {
  std::uint32_t scan_id = 0;
  Vec3 origin = Vec3::Zero();  // sensor origin of the scan, map frame
  SurfelAccumulator acc;
};

struct Cell {
  std::vector<ScanSurfel> per_scan;
  Surfel combined;
  bool dirty = true;

  SurfelAccumulator merged_accumulator() const;
  Vec3 weighted_view_direction() const;
};

/// One resolution level: a hash map from cell key to cell, with the key
/// geometry delegated to the configured backend.
class SparseLevel {
 public:
  SparseLevel(Backend backend, double spacing) : backend_(backend), spacing_(spacing) {}

  Backend backend() const { return backend_; }
  double spacing() const { return spacing_; }

  CellKey key_of(const Vec3& p) const;
  Vec3 center_of(const CellKey& k) const;
  void neighbors(const CellKey& k, std::vector<CellKey>& out) const;

  /// Append points of one scan (map frame, SoA slices). Returns the touched
  /// cell keys, deduplicated.
  std::vector<CellKey> insert_points(std::size_t n, const double* xs, const double* ys,
                                     const double* zs, std::uint32_t scan_id,
                                     const Vec3& origin);

  /// Drop a scan's contributions everywhere; empty cells are erased.
  /// Returns the number of points removed.
  std::int64_t remove_scan(std::uint32_t scan_id);

  /// Rebuild combined surfels of dirty cells.
  void recompute_combined();

  /// Re-key all cells by subtracting `key_offset`, translating the stored
  /// statistics by -delta. Cells whose new center exceeds `survival_bound`
  /// (max-norm) are discarded; returns the number of points dropped.
  std::int64_t shift_keys(const std::array<std::int32_t, 4>& key_offset, const Vec3& delta,
                          double survival_bound);

  const Cell* find(const CellKey& k) const;
  std::size_t cell_count() const { return cells_.size(); }
  std::int64_t point_count() const;

  const std::unordered_map<CellKey, Cell, CellKeyHash>& cells() const { return cells_; }

 private:
  Backend backend_;
  double spacing_;
  std::unordered_map<CellKey, Cell, CellKeyHash> cells_;

  // scratch for batched key computation
  std::vector<std::int32_t> kx_, ky_, kz_;
};

}  // namespace mars
