#pragma once

#include <span>
#include <vector>

#include "mars/map/multires_map.hpp"
#include "mars/spline.hpp"

namespace mars {

struct RegistrationConfig {
  double sigma_scale = 0.25;   // resolution std = sigma_scale * cell spacing of the level
  double outlier_prior = 0.1;  // p(o)
  int em_max_iterations = 15;
  int lm_max_iterations = 3;
  double convergence_translation = 1e-4;  // m, max pose change over the window
  double convergence_rotation = 1e-4;     // rad
};

/// Likelihood of a scan surfel landing on a map surfel under pose T:
/// N(T mu_s - mu_m; 0, Sigma_m + R Sigma_s R^T + sigma^2 I).
double observation_density(const Surfel& scan_surfel, const Surfel& map_surfel, const SE3& T,
                           double sigma);

/// Soft gate on surfel similarity: normal and view-direction angles under a
/// zero-mean normal with std pi/8, and the plane offset n_m^T Sigma_sm^-1 d
/// under a zero-mean normal with std sigma.
double similarity_prior(const Surfel& scan_surfel, const Surfel& map_surfel, const SE3& T,
                        double sigma);

struct AssociationCandidate {
  Vec3 map_mean = Vec3::Zero();
  Mat3 map_cov = Mat3::Zero();
  double prior = 0.0;           // count share over this candidate set
  double weight = 0.0;          // posterior share; sums with outlier_weight to 1
  double leveled_weight = 0.0;  // weight / scan surfel count (M-step weight)
};

struct Association {
  int scan_index = 0;  // position in the window
  Vec3 scan_mean = Vec3::Zero();  // sensor frame
  Mat3 scan_cov = Mat3::Zero();
  Vec3 scan_normal = Vec3::UnitZ();
  Vec3 scan_view = Vec3::UnitZ();
  double scan_count = 0.0;
  double sigma = 0.0;  // resolution std of the resolved level
  std::vector<AssociationCandidate> candidates;
  double outlier_weight = 1.0;
};

struct WindowScanRef {
  std::uint32_t scan_id = 0;
  double timestamp = 0.0;
  const LocalMultiResMap* scan_map = nullptr;  // the scan's own surfel map, sensor frame
};

struct EmIteration {
  double cost_initial = 0.0;
  double cost_final = 0.0;
  int lm_iterations = 0;
  std::size_t associations = 0;
  std::size_t matched = 0;  // associations with at least one candidate
  double outlier_mass = 0.0;
  double neg_log_likelihood = 0.0;
  double step_translation = 0.0;
  double step_rotation = 0.0;
};

struct RegistrationResult {
  int em_iterations = 0;
  bool converged = false;
  bool degenerate = false;      // no productive LM step could be found
  bool unconstrained = false;   // not a single map candidate in the window
  std::size_t scan_surfels = 0;
  std::vector<EmIteration> iterations;
};

/// Soft assignment of every selected scan surfel (resolved by adaptive_select
/// of its scan map) against valid combined map surfels in the 1-hop cell
/// neighborhood at the same level, plus an outlier component.
std::vector<Association> e_step(std::span<const WindowScanRef> window,
                                const TrajectorySpline& spline, const LocalMultiResMap& map,
                                const RegistrationConfig& cfg, const SelectionConfig& sel);

/// Copy of the spline with control parameters incremented: position += dp and
/// rotation right-multiplied by Exp(dr), with dx laid out per control pose as
/// [dp(3); dr(3)].
TrajectorySpline perturb_controls(const TrajectorySpline& spline, const Eigen::VectorXd& dx);

/// The M-step objective: association-weighted squared Mahalanobis distances
/// between transformed scan surfel means and their map candidates, with the
/// joint covariance re-evaluated at the spline's poses.
double m_step_cost(std::span<const Association> associations,
                   std::span<const double> scan_times, const TrajectorySpline& spline);

/// Gradient of m_step_cost with respect to the control parameters (layout of
/// perturb_controls). Exact in the pose tangent, including the rotation
/// dependence of the joint covariance.
Eigen::VectorXd m_step_gradient(std::span<const Association> associations,
                                std::span<const double> scan_times,
                                const TrajectorySpline& spline);

/// Weighted Mahalanobis refinement of the control poses with the association
/// weights frozen. Levenberg-Marquardt, accepting only improving steps; the
/// covariances are re-evaluated at the current poses throughout. Returns the
/// final cost.
double m_step(std::span<const Association> associations, std::span<const double> scan_times,
              TrajectorySpline& spline, const RegistrationConfig& cfg, EmIteration* stats,
              bool* degenerate);

/// Negative joint log-likelihood of the window under the current spline, with
/// candidate gathering redone at the current poses.
double joint_negative_log_likelihood(std::span<const WindowScanRef> window,
                                     const TrajectorySpline& spline,
                                     const LocalMultiResMap& map,
                                     const RegistrationConfig& cfg,
                                     const SelectionConfig& sel);

/// Alternate e_step and m_step until the window poses stop moving or the
/// iteration budget is spent.
RegistrationResult register_window(std::span<const WindowScanRef> window,
                                   TrajectorySpline& spline, const LocalMultiResMap& map,
                                   const RegistrationConfig& cfg, const SelectionConfig& sel);

}  // namespace mars
