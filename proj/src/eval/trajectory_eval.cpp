#include "mars/eval/trajectory_eval.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace mars {

namespace {

void require_increasing(const Trajectory& t, const char* what) {
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i].t > t[i - 1].t))
      throw std::invalid_argument(std::string(what) + ": timestamps must strictly increase");
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& estimate,
                                                           const Trajectory& ground_truth,
                                                           double max_dt) {
  require_increasing(estimate, "estimate");
  require_increasing(ground_truth, "ground truth");
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t j = 0;
  for (std::size_t i = 0; i < estimate.size() && j < ground_truth.size(); ++i) {
    double t = estimate[i].t;
    while (j + 1 < ground_truth.size() &&
           std::abs(ground_truth[j + 1].t - t) <= std::abs(ground_truth[j].t - t))
      ++j;
    if (std::abs(ground_truth[j].t - t) <= max_dt) pairs.emplace_back(i, j++);
  }
  return pairs;
}

AteResult ate_rmse(const Trajectory& estimate, const Trajectory& ground_truth, double max_dt) {
  auto pairs = associate(estimate, ground_truth, max_dt);
  if (pairs.empty()) throw std::runtime_error("no estimate/ground-truth pairs within max_dt");

  AteResult res;
  res.pairs = pairs.size();

  Eigen::Matrix3Xd src(3, pairs.size());
  Eigen::Matrix3Xd dst(3, pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    src.col(static_cast<Eigen::Index>(k)) = estimate[pairs[k].first].pose.translation;
    dst.col(static_cast<Eigen::Index>(k)) = ground_truth[pairs[k].second].pose.translation;
  }

  // rank of the centered ground-truth positions decides whether the rigid
  // alignment is unique; a single point or a straight line is flagged
  Eigen::Matrix3Xd centered = dst.colwise() - dst.rowwise().mean();
  Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
  double sv0 = svd.singularValues()(0);
  double sv1 = pairs.size() > 1 ? svd.singularValues()(1) : 0.0;
  res.degenerate = pairs.size() < 3 || sv1 <= 1e-9 * std::max(sv0, 1.0);

  Eigen::Matrix4d t = Eigen::umeyama(src, dst, false);
  Mat3 r = t.topLeftCorner<3, 3>();
  Vec3 p = t.topRightCorner<3, 1>();
  res.alignment = SE3(SO3(r), p);

  double sq = 0.0;
  for (Eigen::Index k = 0; k < src.cols(); ++k)
    sq += (dst.col(k) - (r * src.col(k) + p)).squaredNorm();
  res.rmse = std::sqrt(sq / static_cast<double>(src.cols()));
  return res;
}

}  // namespace mars
