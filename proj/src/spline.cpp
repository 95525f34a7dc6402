#include "mars/spline.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mars {

namespace {

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Cumulative rows of the uniform B-spline basis matrix: row j holds the
// polynomial coefficients of lambda_j(u) = sum_{s>=j} B_s(u).
struct BlendTable {
  double rows[3][4] = {};
};

BlendTable make_table(int k) {
  double fact = 1.0;
  for (int i = 2; i < k; ++i) fact *= i;

  double M[4][4] = {};
  for (int s = 0; s < k; ++s) {
    for (int n = 0; n < k; ++n) {
      double acc = 0.0;
      for (int l = s; l < k; ++l) {
        const double sign = ((l - s) % 2 == 0) ? 1.0 : -1.0;
        acc += sign * binom(k, l - s) * ipow(k - 1 - l, k - 1 - n);
      }
      M[s][n] = binom(k - 1, n) / fact * acc;
    }
  }

  BlendTable t;
  for (int j = 1; j < k; ++j) {
    for (int n = 0; n < k; ++n) {
      for (int s = j; s < k; ++s) t.rows[j - 1][n] += M[s][n];
    }
  }
  return t;
}

const BlendTable& table_for(int order) {
  static const BlendTable t2 = make_table(2);
  static const BlendTable t3 = make_table(3);
  static const BlendTable t4 = make_table(4);
  switch (order) {
    case 2:
      return t2;
    case 3:
      return t3;
    default:
      return t4;
  }
}

}  // namespace

SegmentPhase segment_and_phase(double t, double t0, double dt) {
  const double s = (t - t0) / dt;
  const double f = std::floor(s);
  return {static_cast<std::int64_t>(f), s - f};
}

void cumulative_blending(int order, double u, double* out) {
  if (order < 2 || order > 4) {
    throw std::invalid_argument("cumulative_blending: order must be 2, 3 or 4");
  }
  const BlendTable& t = table_for(order);
  for (int j = 0; j < order - 1; ++j) {
    double v = 0.0;
    for (int n = order - 1; n >= 0; --n) v = v * u + t.rows[j][n];
    out[j] = v;
  }
}

TrajectorySpline::TrajectorySpline(int order, double t0, double dt,
                                   std::vector<ControlPose> control)
    : order_(order), t0_(t0), dt_(dt), control_(std::move(control)) {
  if (order_ < 2 || order_ > 4) throw std::invalid_argument("spline order must be 2, 3 or 4");
  if (!(dt_ > 0.0)) throw std::invalid_argument("spline knot spacing must be positive");
  if (control_.size() != static_cast<std::size_t>(order_)) {
    throw std::invalid_argument("spline needs exactly `order` control poses");
  }
}

TrajectorySpline TrajectorySpline::constant(int order, double t0, double dt, const SE3& pose) {
  std::vector<ControlPose> c(order, ControlPose{pose.rotation, pose.translation});
  return TrajectorySpline(order, t0, dt, std::move(c));
}

SE3 TrajectorySpline::eval_phase(double s) const {
  double lam[3];
  cumulative_blending(order_, s, lam);
  Vec3 p = control_[0].position;
  SO3 R = control_[0].rotation;
  for (int j = 1; j < order_; ++j) {
    p += lam[j - 1] * (control_[j].position - control_[j - 1].position);
    const Vec3 d = (control_[j - 1].rotation.inverse() * control_[j].rotation).log();
    R = R * SO3::exp(lam[j - 1] * d);
  }
  return SE3(R, p);
}

SE3 TrajectorySpline::evaluate(double t) const {
  const double s = (t - t0_) / dt_;
  if (s < -1e-9 || s > 1.0 + 1e-9) {
    throw std::out_of_range("spline evaluated at t=" + std::to_string(t) +
                            " outside active segment [" + std::to_string(t0_) + ", " +
                            std::to_string(t0_ + dt_) + "]");
  }
  return eval_phase(std::clamp(s, 0.0, 1.0));
}

SE3 TrajectorySpline::evaluate_unchecked(double t) const { return eval_phase((t - t0_) / dt_); }

TrajectorySpline TrajectorySpline::translated(const Vec3& delta) const {
  std::vector<ControlPose> c(control_.begin(), control_.end());
  for (auto& cp : c) cp.position += delta;
  return TrajectorySpline(order_, t0_, dt_, std::move(c));
}

namespace {

constexpr double kReinitRidge = 1e-6;

Eigen::VectorXd reinit_residual(const TrajectorySpline& sp,
                                std::span<const std::pair<double, SE3>> samples,
                                std::span<const ControlPose> warm) {
  const int k = sp.order();
  Eigen::VectorXd r(6 * samples.size() + 6 * k);
  for (std::size_t j = 0; j < samples.size(); ++j) {
    const SE3 at = sp.evaluate_unchecked(samples[j].first);
    r.segment<3>(6 * j) = at.translation - samples[j].second.translation;
    r.segment<3>(6 * j + 3) = (samples[j].second.rotation.inverse() * at.rotation).log();
  }
  const double sw = std::sqrt(kReinitRidge);
  const std::size_t off = 6 * samples.size();
  const auto control = sp.control_poses();
  for (int c = 0; c < k; ++c) {
    r.segment<3>(off + 6 * c) = sw * (control[c].position - warm[c].position);
    r.segment<3>(off + 6 * c + 3) =
        sw * (warm[c].rotation.inverse() * control[c].rotation).log();
  }
  return r;
}

TrajectorySpline apply_step(const TrajectorySpline& sp, const Eigen::VectorXd& dx) {
  std::vector<ControlPose> c(sp.control_poses().begin(), sp.control_poses().end());
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i].position += dx.segment<3>(6 * i);
    c[i].rotation = c[i].rotation * SO3::exp(dx.segment<3>(6 * i + 3));
  }
  return TrajectorySpline(sp.order(), sp.knot_origin(), sp.knot_spacing(), std::move(c));
}

}  // namespace

ReinitResult reinit_after_shift(const TrajectorySpline& previous,
                                std::span<const std::pair<double, SE3>> samples,
                                double new_t0, double new_dt) {
  const int k = previous.order();

  int shift = static_cast<int>(std::llround((new_t0 - previous.knot_origin()) /
                                            previous.knot_spacing()));
  shift = std::clamp(shift, 0, k);
  std::vector<ControlPose> warm(previous.control_poses().begin(),
                                previous.control_poses().end());
  for (int s = 0; s < shift; ++s) {
    const ControlPose last = warm[warm.size() - 1];
    const ControlPose before = warm[warm.size() - 2];
    ControlPose next;
    next.position = last.position + (last.position - before.position);
    next.rotation = last.rotation * (before.rotation.inverse() * last.rotation);
    warm.erase(warm.begin());
    warm.push_back(next);
  }

  TrajectorySpline cur(k, new_t0, new_dt, warm);
  Eigen::VectorXd r = reinit_residual(cur, samples, warm);
  double cost = r.squaredNorm();
  const double warm_cost = cost;

  const int dim = 6 * k;
  double lambda = 1e-4;
  bool converged = false;
  int used = 0;

  for (int it = 0; it < 30 && !converged; ++it) {
    ++used;
    Eigen::MatrixXd J(r.size(), dim);
    const double h = 1e-6;
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(dim);
    for (int p = 0; p < dim; ++p) {
      dx[p] = h;
      const Eigen::VectorXd rp = reinit_residual(apply_step(cur, dx), samples, warm);
      dx[p] = -h;
      const Eigen::VectorXd rm = reinit_residual(apply_step(cur, dx), samples, warm);
      dx[p] = 0.0;
      J.col(p) = (rp - rm) / (2.0 * h);
    }

    const Eigen::VectorXd g = J.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() < 1e-12) {
      converged = true;
      break;
    }
    const Eigen::MatrixXd H = J.transpose() * J;

    bool stepped = false;
    for (int tries = 0; tries < 8; ++tries) {
      Eigen::MatrixXd A = H;
      A.diagonal() += lambda * H.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd step = A.ldlt().solve(-g);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      TrajectorySpline cand = apply_step(cur, step);
      const Eigen::VectorXd rc = reinit_residual(cand, samples, warm);
      const double cand_cost = rc.squaredNorm();
      if (cand_cost < cost) {
        const double drop = cost - cand_cost;
        cur = std::move(cand);
        r = rc;
        cost = cand_cost;
        lambda = std::max(lambda * 0.1, 1e-12);
        stepped = true;
        if (step.norm() < 1e-12 || drop < 1e-16 * (1.0 + cost)) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) break;
  }

  return {std::move(cur), converged, used, warm_cost, cost};
}

}  // namespace mars
