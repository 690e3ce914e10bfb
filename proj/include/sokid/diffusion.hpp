#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sokid/dataset.hpp"
#include "sokid/kernels.hpp"
#include "sokid/sdp.hpp"

namespace sokid {

using DriftFunction = std::function<double(double)>;

/// z_i = mean_j (y_i - y_{i-1} - integral of f along trajectory j)^2.
struct ResidualTargets {
  Eigen::VectorXd z;
  std::vector<FunctionalIndex> index;
};

/// Per-trajectory trapezoid of the drift inside each squared residual.
/// `drift` must be safe to call concurrently.
ResidualTargets residual_targets(const SnapshotEnsemble& ensemble,
                                 const DriftFunction& drift);

/// M_i = integral of E[phi phi^T] over interval i, and their Frobenius Gram.
struct MomentMatrices {
  std::vector<Eigen::MatrixXd> mats;
  Eigen::MatrixXd gram;
};

MomentMatrices moment_matrices(const SnapshotEnsemble& ensemble,
                               const FeatureMap& spec);

/// Builds the Frobenius Gram of an arbitrary list of symmetric matrices.
Eigen::MatrixXd frobenius_gram(const std::vector<Eigen::MatrixXd>& mats);

/// N J(alpha) = alpha^T A alpha + b^T alpha + c.
struct QuadraticCost {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double c = 0.0;

  double operator()(const Eigen::VectorXd& alpha) const {
    return alpha.dot(A * alpha) + b.dot(alpha) + c;
  }
};

/// A = M^2 + N lambda M, b = -2 M z, c = ||z||^2 with M the moment Gram.
QuadraticCost assemble_qp(const MomentMatrices& moments,
                          const ResidualTargets& targets, double lambda);

struct DiffusionDiagnostics {
  sdp::Status status = sdp::Status::optimal;
  int newton_steps = 0;
  int outer_iterations = 0;
  double gap = 0.0;           // in the solver's normalized units
  double objective = 0.0;     // N J(alpha)
  double min_eig_before_clamp = 0.0;
  double clamp_magnitude = 0.0;
  bool ridge_added = false;
  double cost_scale = 1.0;    // objective normalization used for the solve
  double variable_scale = 1.0;
  Eigen::Index epigraph_rank = 0;
  Eigen::Index reduced_dimension = 0;  // SDP unknowns besides t
  double start_scale = 0.0;  // alpha at the start is this times the projected ones vector
};

/// sigma^2(x) = phi(x)^T Q phi(x) with Q positive semidefinite.
class DiffusionModel {
 public:
  /// Q is projected onto the PSD cone (eigenvalues clamped at 0).
  DiffusionModel(FeatureMap features, Eigen::MatrixXd Q, double lambda,
                 Eigen::VectorXd alpha = {}, DiffusionDiagnostics diag = {});

  const FeatureMap& features() const noexcept { return features_; }
  const Eigen::MatrixXd& Q() const noexcept { return Q_; }
  double lambda() const noexcept { return lambda_; }
  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
  const DiffusionDiagnostics& diagnostics() const noexcept { return diag_; }
  /// Magnitude of the most negative eigenvalue removed by the projection.
  double projection_clamp() const noexcept { return clamp_; }

  /// Evaluated as sum_i (u_i^T phi(x))^2, which is non-negative in floating
  /// point as well.
  double sigma_squared(double x) const;
  double sigma(double x) const;

 private:
  FeatureMap features_;
  Eigen::MatrixXd Q_;
  Eigen::MatrixXd factor_;  // p x r, Q = factor factor^T
  double lambda_;
  Eigen::VectorXd alpha_;
  DiffusionDiagnostics diag_;
  double clamp_ = 0.0;
};

struct DiffusionFitOptions {
  double tol = 1e-7;
  int max_iter = 500;
  double rank_tol = 1e-10;
  /// When set, the pencil and every Newton iterate are dumped here as JSON.
  std::optional<std::filesystem::path> debug_sdp;
};

/// Solves the SOS-constrained least squares from precomputed pieces.
/// Throws Error(solver) unless the SDP reaches optimal status.
DiffusionModel fit_diffusion(const MomentMatrices& moments,
                             const ResidualTargets& targets,
                             const FeatureMap& spec, double lambda,
                             const DiffusionFitOptions& options = {});

DiffusionModel fit_diffusion(const SnapshotEnsemble& ensemble,
                             const FeatureMap& spec, const DriftFunction& drift,
                             double lambda,
                             const DiffusionFitOptions& options = {});

inline double eval_diffusion_sq(const DiffusionModel& model, double x) {
  return model.sigma_squared(x);
}
inline double eval_diffusion(const DiffusionModel& model, double x) {
  return model.sigma(x);
}
Eigen::VectorXd eval_diffusion(const DiffusionModel& model,
                               std::span<const double> xs);

/// Vectors u_i = sqrt(l_i) v_i for eigenvalues l_i > 1e-10 l_max, so that
/// sum_i u_i u_i^T = Q. Throws Error(numerical) when Q is indefinite beyond
/// that tolerance.
std::vector<Eigen::VectorXd> sos_decomposition(const Eigen::MatrixXd& Q);

}  // namespace sokid
