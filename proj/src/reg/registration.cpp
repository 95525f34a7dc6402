#include "mars/reg/registration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace mars {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kAngleStd = std::numbers::pi / 8.0;
constexpr double kGradientFloor = 1e-12;

double gauss3(const Vec3& d, const Mat3& a) {
  double det = a.determinant();
  if (!(det > 0.0)) return 0.0;
  double quad = d.dot(a.inverse() * d);
  return std::exp(-0.5 * quad) / std::sqrt(kTwoPi * kTwoPi * kTwoPi * det);
}

double gauss1(double x, double var) { return std::exp(-0.5 * x * x / var) / std::sqrt(kTwoPi * var); }

/// Joint covariance of the surfel pair under pose T.
Mat3 pair_covariance(const Mat3& map_cov, const Mat3& rotated_scan_cov, double sigma) {
  return map_cov + rotated_scan_cov + sigma * sigma * Mat3::Identity();
}

struct SelectedScan {
  WindowScanRef ref;
  std::vector<ResolvedSurfel> surfels;
};

std::vector<SelectedScan> select_window(std::span<const WindowScanRef> window,
                                        const SelectionConfig& sel) {
  std::vector<SelectedScan> out;
  out.reserve(window.size());
  for (const auto& w : window) {
    if (w.scan_map == nullptr) throw std::invalid_argument("window scan without a scan map");
    out.push_back({w, w.scan_map->adaptive_select(sel)});
  }
  return out;
}

/// Evidence of one scan surfel: outlier density plus matched-map terms over
/// the 1-hop neighborhood of the map cell containing the transformed mean.
/// The lookup level is where that mean resolves in the map's egocentric
/// hierarchy (the finest level whose volume contains it), so candidates come
/// from populated cells and σ tracks the local map discretization. Returns
/// the total (the per-surfel likelihood); fills `out` with unnormalized
/// candidate terms when given.
double score_surfel(const LocalMultiResMap& map, const ResolvedSurfel& rs, const SE3& t,
                    const Mat3& r, const RegistrationConfig& cfg, std::vector<CellKey>& nb,
                    Association* out) {
  const Surfel& s = rs.surfel;
  Vec3 tm = t * s.mean;
  int lvl = map.level_for_point(tm);
  double sigma = cfg.sigma_scale * map.level_spacing(lvl < 0 ? 0 : lvl);
  Mat3 rotated_cov = r * s.covariance * r.transpose();
  double outlier = cfg.outlier_prior *
                   gauss3(Vec3::Zero(), rotated_cov + sigma * sigma * Mat3::Identity());

  double total_count = 0.0;
  std::vector<const Surfel*> found;
  if (lvl >= 0) {
    const SparseLevel& lv = map.level(lvl);
    lv.neighbors(lv.key_of(tm), nb);
    for (const CellKey& k : nb) {
      const Cell* cell = lv.find(k);
      if (cell != nullptr && cell->combined.valid) {
        found.push_back(&cell->combined);
        total_count += cell->combined.count;
      }
    }
  }

  if (out != nullptr) {
    out->scan_mean = s.mean;
    out->scan_cov = s.covariance;
    out->scan_normal = s.normal;
    out->scan_view = s.view_direction;
    out->scan_count = s.count;
    out->sigma = sigma;
    out->candidates.clear();
  }

  Vec3 n_s = t.rotation * s.normal;
  Vec3 v_s = t.rotation * s.view_direction;
  double var_a = kAngleStd * kAngleStd;
  double z = outlier;
  for (const Surfel* m : found) {
    Mat3 a = pair_covariance(m->covariance, rotated_cov, sigma);
    double det = a.determinant();
    if (!(det > 0.0)) continue;
    Mat3 ai = a.inverse();
    Vec3 d = tm - m->mean;
    double density = std::exp(-0.5 * d.dot(ai * d)) / std::sqrt(kTwoPi * kTwoPi * kTwoPi * det);
    double angle_n = std::acos(std::clamp(n_s.dot(m->normal), -1.0, 1.0));
    double angle_v = std::acos(std::clamp(v_s.dot(m->view_direction), -1.0, 1.0));
    double plane_offset = m->normal.dot(d);
    double prior_sim = gauss1(angle_n, var_a) * gauss1(angle_v, var_a) *
                       gauss1(plane_offset, sigma * sigma);
    double prior_count = m->count / total_count;
    double q = prior_count * prior_sim * density;
    z += q;
    if (out != nullptr) {
      AssociationCandidate c;
      c.map_mean = m->mean;
      c.map_cov = m->covariance;
      c.prior = prior_count;
      c.weight = q;  // normalized by the caller
      out->candidates.push_back(c);
    }
  }
  if (out != nullptr) out->outlier_weight = outlier;
  return z;
}

std::vector<Association> e_step_impl(std::span<const SelectedScan> scans,
                                     const TrajectorySpline& spline,
                                     const LocalMultiResMap& map,
                                     const RegistrationConfig& cfg) {
  std::vector<Association> out;
  std::vector<CellKey> nb;
  for (std::size_t si = 0; si < scans.size(); ++si) {
    SE3 t = spline.evaluate_unchecked(scans[si].ref.timestamp);
    Mat3 r = t.rotation.matrix();
    for (const ResolvedSurfel& rs : scans[si].surfels) {
      Association a;
      a.scan_index = static_cast<int>(si);
      double z = score_surfel(map, rs, t, r, cfg, nb, &a);
      if (!(z > 0.0)) {  // no evidence at all; keep it as pure outlier
        a.outlier_weight = 1.0;
        a.candidates.clear();
      } else {
        for (AssociationCandidate& c : a.candidates) {
          c.weight /= z;
          c.leveled_weight = c.weight / a.scan_count;
        }
        a.outlier_weight /= z;
      }
      out.push_back(std::move(a));
    }
  }
  return out;
}

double nll_impl(std::span<const SelectedScan> scans, const TrajectorySpline& spline,
                const LocalMultiResMap& map, const RegistrationConfig& cfg) {
  double nll = 0.0;
  std::vector<CellKey> nb;
  const bool dump = std::getenv("MARS_NLL_DUMP") != nullptr;
  for (const SelectedScan& sc : scans) {
    SE3 t = spline.evaluate_unchecked(sc.ref.timestamp);
    Mat3 r = t.rotation.matrix();
    for (const ResolvedSurfel& rs : sc.surfels) {
      double z = score_surfel(map, rs, t, r, cfg, nb, nullptr);
      if (dump) {
        Vec3 tm = t * rs.surfel.mean;
        std::fprintf(stderr, "surfel scan=%d lvl_sel=%d lvl_map=%d n=%u tm=(%.3f %.3f %.3f) -logz=%.4f\n",
                     sc.ref.scan_id, rs.level, map.level_for_point(tm), rs.surfel.count,
                     tm.x(), tm.y(), tm.z(), z > 0.0 ? -std::log(z) : 999.0);
      }
      if (z > 0.0) nll -= std::log(z);
    }
  }
  return nll;
}

/// Interpolates between two splines with identical layout: position linearly,
/// rotation along the relative geodesic. Used to shorten an over-eager
/// optimizer displacement.
TrajectorySpline blend_controls(const TrajectorySpline& from, const TrajectorySpline& to,
                                double alpha) {
  auto a = from.control_poses();
  auto b = to.control_poses();
  std::vector<ControlPose> c(a.begin(), a.end());
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i].position += alpha * (b[i].position - a[i].position);
    c[i].rotation = a[i].rotation * SO3::exp(alpha * (a[i].rotation.inverse() * b[i].rotation).log());
  }
  return TrajectorySpline(from.order(), from.knot_origin(), from.knot_spacing(), std::move(c));
}

/// Sensitivity of the pose at `time` to the control parameters, by central
/// differences. Columns follow the parameter layout of perturb_controls; rows
/// are the local tangent [rotation(3); translation(3)].
Eigen::Matrix<double, 6, Eigen::Dynamic> pose_param_jacobian(const TrajectorySpline& sp,
                                                             double time) {
  const double h = 1e-6;
  int dim = 6 * sp.order();
  Eigen::Matrix<double, 6, Eigen::Dynamic> m(6, dim);
  SE3 base = sp.evaluate_unchecked(time);
  SO3 base_inv = base.rotation.inverse();
  Eigen::VectorXd dx = Eigen::VectorXd::Zero(dim);
  for (int p = 0; p < dim; ++p) {
    dx[p] = h;
    SE3 plus = perturb_controls(sp, dx).evaluate_unchecked(time);
    dx[p] = -h;
    SE3 minus = perturb_controls(sp, dx).evaluate_unchecked(time);
    dx[p] = 0.0;
    m.col(p).head<3>() = ((base_inv * plus.rotation).log() - (base_inv * minus.rotation).log()) /
                         (2.0 * h);
    m.col(p).tail<3>() = (plus.translation - minus.translation) / (2.0 * h);
  }
  return m;
}

/// Gradient and Gauss-Newton Hessian of the weighted Mahalanobis objective in
/// control-parameter coordinates. The gradient is exact in the local pose
/// tangent -- including the dependence of the joint covariance on the
/// rotation -- and chained through the spline sensitivity.
void assemble_normal_equations(std::span<const Association> as, std::span<const double> times,
                               const TrajectorySpline& sp, Eigen::VectorXd* g,
                               Eigen::MatrixXd* h) {
  int dim = 6 * sp.order();
  g->setZero(dim);
  h->setZero(dim, dim);

  std::vector<SE3> pose(times.size());
  std::vector<Mat3> rot(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    pose[i] = sp.evaluate_unchecked(times[i]);
    rot[i] = pose[i].rotation.matrix();
  }

  Eigen::Matrix<double, 6, 1> g_loc;
  Eigen::Matrix<double, 6, 6> h_loc;
  for (std::size_t i = 0; i < times.size(); ++i) {
    g_loc.setZero();
    h_loc.setZero();
    bool touched = false;
    for (const Association& a : as) {
      if (a.scan_index != static_cast<int>(i) || a.candidates.empty()) continue;
      const Mat3& r = rot[i];
      Mat3 rotated_cov = r * a.scan_cov * r.transpose();
      Vec3 tm = pose[i] * a.scan_mean;
      Eigen::Matrix<double, 3, 6> jloc;
      jloc.leftCols<3>() = -r * skew(a.scan_mean);
      jloc.rightCols<3>() = Mat3::Identity();
      for (const AssociationCandidate& c : a.candidates) {
        double w = c.leveled_weight;
        if (!(w > 0.0)) continue;
        Mat3 am = pair_covariance(c.map_cov, rotated_cov, a.sigma);
        Mat3 ai = am.inverse();
        Vec3 d = tm - c.map_mean;
        Vec3 q = ai * d;
        Vec3 rq = r.transpose() * q;
        g_loc.head<3>() += 2.0 * w * a.scan_mean.cross(rq);
        g_loc.head<3>() -= 2.0 * w * (a.scan_cov * rq).cross(rq);
        g_loc.tail<3>() += 2.0 * w * q;
        h_loc += 2.0 * w * jloc.transpose() * ai * jloc;
        touched = true;
      }
    }
    if (!touched) continue;
    Eigen::Matrix<double, 6, Eigen::Dynamic> m = pose_param_jacobian(sp, times[i]);
    *g += m.transpose() * g_loc;
    *h += m.transpose() * h_loc * m;
  }
}

}  // namespace

double observation_density(const Surfel& scan_surfel, const Surfel& map_surfel, const SE3& T,
                           double sigma) {
  Mat3 r = T.rotation.matrix();
  Mat3 a = pair_covariance(map_surfel.covariance, r * scan_surfel.covariance * r.transpose(),
                           sigma);
  return gauss3(T * scan_surfel.mean - map_surfel.mean, a);
}

double similarity_prior(const Surfel& scan_surfel, const Surfel& map_surfel, const SE3& T,
                        double sigma) {
  Mat3 r = T.rotation.matrix();
  Mat3 a = pair_covariance(map_surfel.covariance, r * scan_surfel.covariance * r.transpose(),
                           sigma);
  double det = a.determinant();
  if (!(det > 0.0)) return 0.0;
  Vec3 d = T * scan_surfel.mean - map_surfel.mean;
  double angle_n = std::acos(std::clamp(
      (T.rotation * scan_surfel.normal).dot(map_surfel.normal), -1.0, 1.0));
  double angle_v = std::acos(std::clamp(
      (T.rotation * scan_surfel.view_direction).dot(map_surfel.view_direction), -1.0, 1.0));
  double plane_offset = map_surfel.normal.dot(d);
  double var_a = kAngleStd * kAngleStd;
  return gauss1(angle_n, var_a) * gauss1(angle_v, var_a) *
         gauss1(plane_offset, sigma * sigma);
}

std::vector<Association> e_step(std::span<const WindowScanRef> window,
                                const TrajectorySpline& spline, const LocalMultiResMap& map,
                                const RegistrationConfig& cfg, const SelectionConfig& sel) {
  auto scans = select_window(window, sel);
  return e_step_impl(scans, spline, map, cfg);
}

double joint_negative_log_likelihood(std::span<const WindowScanRef> window,
                                     const TrajectorySpline& spline,
                                     const LocalMultiResMap& map,
                                     const RegistrationConfig& cfg,
                                     const SelectionConfig& sel) {
  auto scans = select_window(window, sel);
  return nll_impl(scans, spline, map, cfg);
}

TrajectorySpline perturb_controls(const TrajectorySpline& sp, const Eigen::VectorXd& dx) {
  auto view = sp.control_poses();
  if (dx.size() != static_cast<Eigen::Index>(6 * view.size()))
    throw std::invalid_argument("perturb_controls: increment size mismatch");
  std::vector<ControlPose> c(view.begin(), view.end());
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i].position += dx.segment<3>(static_cast<Eigen::Index>(6 * i));
    c[i].rotation = c[i].rotation * SO3::exp(dx.segment<3>(static_cast<Eigen::Index>(6 * i + 3)));
  }
  return TrajectorySpline(sp.order(), sp.knot_origin(), sp.knot_spacing(), std::move(c));
}

double m_step_cost(std::span<const Association> as, std::span<const double> scan_times,
                   const TrajectorySpline& sp) {
  std::vector<SE3> pose(scan_times.size());
  std::vector<Mat3> rot(scan_times.size());
  for (std::size_t i = 0; i < scan_times.size(); ++i) {
    pose[i] = sp.evaluate_unchecked(scan_times[i]);
    rot[i] = pose[i].rotation.matrix();
  }
  double cost = 0.0;
  for (const Association& a : as) {
    const Mat3& r = rot[a.scan_index];
    Mat3 rotated_cov = r * a.scan_cov * r.transpose();
    Vec3 tm = pose[a.scan_index] * a.scan_mean;
    for (const AssociationCandidate& c : a.candidates) {
      if (!(c.leveled_weight > 0.0)) continue;
      Mat3 am = pair_covariance(c.map_cov, rotated_cov, a.sigma);
      Vec3 d = tm - c.map_mean;
      cost += c.leveled_weight * d.dot(am.inverse() * d);
    }
  }
  return cost;
}

Eigen::VectorXd m_step_gradient(std::span<const Association> as,
                                std::span<const double> scan_times,
                                const TrajectorySpline& sp) {
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  assemble_normal_equations(as, scan_times, sp, &g, &h);
  return g;
}

double m_step(std::span<const Association> associations, std::span<const double> scan_times,
              TrajectorySpline& spline, const RegistrationConfig& cfg, EmIteration* stats,
              bool* degenerate) {
  double cost = m_step_cost(associations, scan_times, spline);
  if (stats != nullptr) stats->cost_initial = cost;

  double lambda = 1e-4;
  int iterations = 0;
  bool any_step = false;
  bool wanted_step = false;
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  for (int it = 0; it < cfg.lm_max_iterations; ++it) {
    assemble_normal_equations(associations, scan_times, spline, &g, &h);
    if (g.lpNorm<Eigen::Infinity>() < kGradientFloor) break;
    wanted_step = true;
    bool stepped = false;
    for (int attempt = 0; attempt < 6 && !stepped; ++attempt) {
      Eigen::MatrixXd damped = h;
      damped.diagonal() += lambda * h.diagonal().cwiseMax(1e-12);
      Eigen::VectorXd dx = damped.ldlt().solve(-g);
      if (!dx.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      TrajectorySpline trial = perturb_controls(spline, dx);
      double trial_cost = m_step_cost(associations, scan_times, trial);
      if (trial_cost < cost) {
        spline = trial;
        cost = trial_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        stepped = true;
      } else {
        lambda *= 10.0;
      }
    }
    ++iterations;
    if (!stepped) break;
    any_step = true;
  }

  if (stats != nullptr) {
    stats->cost_final = cost;
    stats->lm_iterations = iterations;
  }
  if (degenerate != nullptr && wanted_step && !any_step) *degenerate = true;
  return cost;
}

RegistrationResult register_window(std::span<const WindowScanRef> window,
                                   TrajectorySpline& spline, const LocalMultiResMap& map,
                                   const RegistrationConfig& cfg, const SelectionConfig& sel) {
  RegistrationResult res;
  auto scans = select_window(window, sel);
  for (const SelectedScan& sc : scans) res.scan_surfels += sc.surfels.size();

  std::vector<double> times;
  times.reserve(window.size());
  for (const auto& w : window) times.push_back(w.timestamp);

  double nll_prev = nll_impl(scans, spline, map, cfg);
  for (int em = 0; em < cfg.em_max_iterations; ++em) {
    auto assoc = e_step_impl(scans, spline, map, cfg);

    std::size_t matched = 0;
    std::size_t candidate_total = 0;
    double outlier_sum = 0.0;
    for (const Association& a : assoc) {
      candidate_total += a.candidates.size();
      if (!a.candidates.empty()) ++matched;
      outlier_sum += a.outlier_weight;
    }
    if (candidate_total == 0) {
      res.unconstrained = true;
      break;
    }

    EmIteration it;
    it.associations = assoc.size();
    it.matched = matched;
    it.outlier_mass = assoc.empty() ? 1.0 : outlier_sum / static_cast<double>(assoc.size());

    TrajectorySpline prev = spline;
    std::vector<SE3> before(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) before[i] = prev.evaluate_unchecked(times[i]);

    m_step(assoc, times, spline, cfg, &it, &res.degenerate);

    // The quadratic objective drops the density normalizers and match priors
    // of the joint model, so a step that lowers it can still worsen the fit.
    // Keep only as much of the displacement as the joint likelihood accepts;
    // when none of it helps, the refinement is exhausted.
    double nll_new = nll_impl(scans, spline, map, cfg);
    bool accepted = nll_new <= nll_prev;
    if (!accepted) {
      for (double alpha : {0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625}) {
        TrajectorySpline trial = blend_controls(prev, spline, alpha);
        double trial_nll = nll_impl(scans, trial, map, cfg);
        if (trial_nll <= nll_prev) {
          spline = trial;
          nll_new = trial_nll;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      spline = prev;
      nll_new = nll_prev;
    }

    double step_t = 0.0;
    double step_r = 0.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      SE3 after = spline.evaluate_unchecked(times[i]);
      step_t = std::max(step_t, (after.translation - before[i].translation).norm());
      step_r = std::max(step_r, (before[i].rotation.inverse() * after.rotation).log().norm());
    }
    it.step_translation = step_t;
    it.step_rotation = step_r;
    it.neg_log_likelihood = nll_new;

    res.iterations.push_back(it);
    ++res.em_iterations;
    nll_prev = nll_new;
    if (!accepted || (step_t < cfg.convergence_translation && step_r < cfg.convergence_rotation)) {
      res.converged = true;
      break;
    }
  }

  // The quadratic refinement stalls a little short of the likelihood optimum
  // wherever association weights are asymmetric across neighboring cells, so
  // finish with a pattern descent on the joint likelihood itself: common
  // translation and body-rotation probes over the control poses, shrinking
  // the radius, keeping improvements only.
  if (!res.unconstrained && !res.iterations.empty() && std::getenv("MARS_NO_POLISH") == nullptr) {
    double best = nll_prev;
    double radius_t = 0.02;
    double radius_r = 0.005;
    int evals = 0;
    while (radius_t >= 2.5e-4 && evals < 240) {
      bool improved = false;
      for (int axis = 0; axis < 6 && evals < 240; ++axis) {
        for (double sign : {1.0, -1.0}) {
          Eigen::VectorXd dx = Eigen::VectorXd::Zero(6 * spline.order());
          for (int c = 0; c < spline.order(); ++c) {
            if (axis < 3) {
              dx[6 * c + axis] = sign * radius_t;
            } else {
              dx[6 * c + axis] = sign * radius_r;
            }
          }
          TrajectorySpline trial = perturb_controls(spline, dx);
          double v = nll_impl(scans, trial, map, cfg);
          ++evals;
          if (v < best - 1e-9) {
            best = v;
            spline = trial;
            improved = true;
            break;
          }
        }
      }
      if (!improved) {
        radius_t *= 0.5;
        radius_r *= 0.5;
      }
    }
    res.iterations.back().neg_log_likelihood = best;
  }
  return res;
}

}  // namespace mars
