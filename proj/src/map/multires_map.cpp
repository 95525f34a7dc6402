#include "mars/map/multires_map.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "mars/kernels/kernels.hpp"

namespace mars {

LocalMultiResMap::LocalMultiResMap(const MapConfig& cfg) : cfg_(cfg) {
  if (cfg_.levels < 1) throw std::invalid_argument("map needs at least one level");
  if (!(cfg_.cell_size > 0.0) || !(cfg_.side_length > 0.0)) {
    throw std::invalid_argument("map extents must be positive");
  }
  levels_.reserve(cfg_.levels);
  for (int l = 0; l < cfg_.levels; ++l) {
    levels_.emplace_back(cfg_.backend, level_spacing(l));
  }
}

int LocalMultiResMap::level_for_point(const Vec3& p) const {
  const double m = p.lpNorm<Eigen::Infinity>();
  for (int l = cfg_.levels - 1; l >= 0; --l) {
    if (m <= level_half_side(l)) return l;
  }
  return -1;
}

void LocalMultiResMap::integrate_scan(const PointCloud& cloud, const SE3& pose,
                                      std::uint32_t scan_id) {
  if (!integrated_ids_.insert(scan_id).second) {
    throw std::invalid_argument("scan id " + std::to_string(scan_id) + " already integrated");
  }

  const std::size_t n = cloud.size();
  tx_.resize(n);
  ty_.resize(n);
  tz_.resize(n);
  const Mat3 Rm = pose.rotation.matrix();
  const double R[9] = {Rm(0, 0), Rm(0, 1), Rm(0, 2), Rm(1, 0), Rm(1, 1),
                       Rm(1, 2), Rm(2, 0), Rm(2, 1), Rm(2, 2)};
  if (n > 0) {
    kernels::active().transform_points(n, R, pose.translation.data(), cloud.x.data(),
                                       cloud.y.data(), cloud.z.data(), tx_.data(), ty_.data(),
                                       tz_.data());
  }

  level_of_.resize(n);
  std::vector<std::size_t> per_level_count(cfg_.levels, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int l = level_for_point(Vec3(tx_[i], ty_[i], tz_[i]));
    level_of_[i] = l < 0 ? UINT32_MAX : static_cast<std::uint32_t>(l);
    if (l >= 0) ++per_level_count[l];
  }

  const Vec3 origin = pose.translation;
  for (int l = 0; l < cfg_.levels; ++l) {
    if (per_level_count[l] == 0) continue;
    gx_.clear();
    gy_.clear();
    gz_.clear();
    gx_.reserve(per_level_count[l]);
    gy_.reserve(per_level_count[l]);
    gz_.reserve(per_level_count[l]);
    for (std::size_t i = 0; i < n; ++i) {
      if (level_of_[i] == static_cast<std::uint32_t>(l)) {
        gx_.push_back(tx_[i]);
        gy_.push_back(ty_[i]);
        gz_.push_back(tz_[i]);
      }
    }
    levels_[l].insert_points(gx_.size(), gx_.data(), gy_.data(), gz_.data(), scan_id, origin);
    ledger_ += static_cast<std::int64_t>(gx_.size());
    levels_[l].recompute_combined();
  }

  keyframes_.push_back(Keyframe{scan_id, pose});
  sensor_origin_ = pose.translation;
}

void LocalMultiResMap::enforce_window(int max_keyframes) {
  bool removed = false;
  while (static_cast<int>(keyframes_.size()) > max_keyframes) {
    const std::uint32_t id = keyframes_.front().scan_id;
    keyframes_.pop_front();
    for (auto& lvl : levels_) ledger_ -= lvl.remove_scan(id);
    removed = true;
  }
  if (removed) {
    for (auto& lvl : levels_) lvl.recompute_combined();
  }
}

double LocalMultiResMap::shift_quantum() const {
  return cfg_.backend == Backend::kGrid ? cfg_.cell_size : lattice_axis_period(cfg_.cell_size);
}

std::array<int, 3> LocalMultiResMap::maybe_shift(const SE3& sensor_pose) {
  const double q = shift_quantum();
  const Vec3& t = sensor_pose.translation;
  std::array<int, 3> s{static_cast<int>(std::trunc(t.x() / q)),
                       static_cast<int>(std::trunc(t.y() / q)),
                       static_cast<int>(std::trunc(t.z() / q))};
  if (s[0] == 0 && s[1] == 0 && s[2] == 0) return s;

  const Vec3 delta(s[0] * q, s[1] * q, s[2] * q);
  for (int l = 0; l < cfg_.levels; ++l) {
    const int scale = 1 << l;
    std::array<std::int32_t, 4> offset;
    if (cfg_.backend == Backend::kGrid) {
      offset = {s[0] * scale, s[1] * scale, s[2] * scale, 0};
    } else {
      offset = lattice_axis_offset(s[0] * scale, s[1] * scale, s[2] * scale);
    }
    const double bound = level_half_side(l) + 0.5 * level_spacing(l) + 1e-9;
    ledger_ -= levels_[l].shift_keys(offset, delta, bound);
  }

  map_pose_ = map_pose_ * SE3::from_translation(delta);
  sensor_origin_ -= delta;
  for (auto& kf : keyframes_) kf.pose.translation -= delta;
  return s;
}

namespace {

bool passes_conditions(const SelectionConfig& sel, const Surfel& s) {
  const double tr = s.eigenvalues.sum();
  if (!(tr > 0.0)) return false;
  const double l0 = s.eigenvalues[0] / tr;
  const double l1 = s.eigenvalues[1] / tr;
  return l0 < sel.theta_planar || l0 < l1 * sel.theta_scale || l1 < sel.theta_degenerate;
}

struct Candidate {
  SurfelAccumulator acc;
  Surfel surfel;
  int level = 0;
  CellKey key;
};

std::int32_t floor_half(std::int32_t v) { return v >> 1; }

}  // namespace

std::vector<ResolvedSurfel> LocalMultiResMap::all_valid_surfels() const {
  std::vector<ResolvedSurfel> out;
  for (int l = 0; l < cfg_.levels; ++l) {
    for (const auto& [key, cell] : levels_[l].cells()) {
      if (cell.combined.valid) out.push_back(ResolvedSurfel{cell.combined, l, key});
    }
  }
  return out;
}

std::vector<ResolvedSurfel> LocalMultiResMap::adaptive_select(const SelectionConfig& sel) const {
  if (!sel.enabled || cfg_.levels == 1) return all_valid_surfels();

  std::vector<ResolvedSurfel> out;
  std::vector<Candidate> pool;
  for (const auto& [key, cell] : levels_[cfg_.levels - 1].cells()) {
    if (cell.combined.valid) {
      pool.push_back(Candidate{cell.merged_accumulator(), cell.combined, cfg_.levels - 1, key});
    }
  }

  for (int l = cfg_.levels - 1; l >= 1; --l) {
    const int cl = l - 1;
    const SparseLevel& coarse = levels_[cl];

    std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> groups;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      CellKey parent;
      if (cfg_.backend == Backend::kGrid) {
        parent = CellKey{{floor_half(pool[i].key.v[0]), floor_half(pool[i].key.v[1]),
                          floor_half(pool[i].key.v[2]), 0}};
      } else {
        parent = lattice_key(pool[i].surfel.mean, coarse.spacing());
      }
      groups[parent].push_back(i);
    }

    std::vector<Candidate> next;
    std::unordered_set<CellKey, CellKeyHash> consumed_native;

    for (auto& [parent, members] : groups) {
      const Cell* native = coarse.find(parent);
      const bool has_native = native != nullptr && !native->per_scan.empty();

      bool all_fine_pass = true;
      for (std::size_t m : members) {
        if (!passes_conditions(sel, pool[m].surfel)) {
          all_fine_pass = false;
          break;
        }
      }

      // A lone child with no coarse-cell content gains nothing from
      // promotion and would only blur its resolution; keep it fine.
      const bool worthwhile = members.size() > 1 || has_native;

      if (all_fine_pass && worthwhile) {
        SurfelAccumulator merged(coarse.center_of(parent));
        Vec3 view_sum = Vec3::Zero();
        Vec3 normal_sum = Vec3::Zero();
        for (std::size_t m : members) {
          merged.merge(pool[m].acc);
          view_sum += static_cast<double>(pool[m].surfel.count) * pool[m].surfel.view_direction;
          normal_sum += pool[m].surfel.normal;
        }
        if (has_native) {
          const SurfelAccumulator nacc = native->merged_accumulator();
          merged.merge(nacc);
          view_sum +=
              static_cast<double>(nacc.count) * native->combined.view_direction;
        }
        Vec3 view = view_sum.norm() > 1e-12 ? Vec3(view_sum.normalized())
                                            : pool[members.front()].surfel.view_direction;
        const Surfel cs = finalize_with_view(merged, view);
        const Vec3 nbar = normal_sum.norm() > 1e-12 ? Vec3(normal_sum.normalized())
                                                    : pool[members.front()].surfel.normal;
        if (cs.valid && passes_conditions(sel, cs) &&
            std::abs(cs.normal.dot(nbar)) > sel.theta_normal) {
          next.push_back(Candidate{merged, cs, cl, parent});
          if (has_native) consumed_native.insert(parent);
          continue;
        }
      }

      for (std::size_t m : members) {
        out.push_back(ResolvedSurfel{pool[m].surfel, pool[m].level, pool[m].key});
      }
    }

    for (const auto& [key, cell] : coarse.cells()) {
      if (cell.combined.valid && consumed_native.count(key) == 0) {
        next.push_back(Candidate{cell.merged_accumulator(), cell.combined, cl, key});
      }
    }

    pool = std::move(next);
  }

  for (auto& c : pool) out.push_back(ResolvedSurfel{c.surfel, c.level, c.key});
  return out;
}

std::int64_t LocalMultiResMap::point_count() const {
  std::int64_t total = 0;
  for (const auto& lvl : levels_) total += lvl.point_count();
  return total;
}

}  // namespace mars
