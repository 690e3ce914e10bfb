#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sokid/dataset.hpp"
#include "sokid/kernels.hpp"

namespace sokid {

/// How the double expectation E[K(x_s, x_t)] pairs trajectories of one
/// group. Across groups every pair is used.
enum class PairingMode {
  /// Ordered pairs j1 != j2, treating x_s and x_t as independent copies.
  independent_copies,
  /// All k^2 pairs including j1 == j2 (a single trajectory pairs with itself).
  all_pairs,
};

/// L*_{ij} = <L_i*, L_j*> for every pair of occupation functionals.
struct OccupationGram {
  Eigen::MatrixXd matrix;
  std::vector<FunctionalIndex> index;
};

/// Trapezoid quadrature over the four corner time pairs of each interval
/// pair, applied to the empirical expectation of K. Entries are computed in
/// parallel; the result does not depend on scheduling.
///
/// Throws Error(validation) if a group has k < 2 trajectories in
/// independent_copies mode.
OccupationGram occupation_gram(
    const SnapshotEnsemble& ensemble, const GaussianKernel& kern,
    PairingMode pairing = PairingMode::independent_copies);

/// L_i*(x) for functional `row` (group-major, interval-minor).
double representer_eval(const SnapshotEnsemble& ensemble,
                        const GaussianKernel& kern, std::size_t row, double x);

/// Result of the regularized solve (L* + lambda N I) alpha = targets.
struct RidgeSolution {
  Eigen::VectorXd alpha;
  /// True when the Cholesky factorization was rejected and the eigen
  /// pseudo-inverse was used instead.
  bool used_fallback = false;
  double residual_norm = 0.0;
};

/// Solves (gram + lambda N I) alpha = targets with N = targets.size().
/// Throws Error(numerical) for a singular system at lambda = 0 or
/// non-finite input.
RidgeSolution solve_ridge(const Eigen::MatrixXd& gram,
                          const Eigen::VectorXd& targets, double lambda);

/// f* = sum_i alpha_i L_i*. Immutable after construction.
class DriftModel {
 public:
  DriftModel(std::shared_ptr<const SnapshotEnsemble> ensemble,
             GaussianKernel kern, double lambda, Eigen::VectorXd alpha,
             PairingMode pairing = PairingMode::independent_copies,
             bool used_fallback = false);

  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
  const GaussianKernel& kernel() const noexcept { return kernel_; }
  double lambda() const noexcept { return lambda_; }
  PairingMode pairing() const noexcept { return pairing_; }
  bool used_fallback() const noexcept { return used_fallback_; }
  const SnapshotEnsemble& ensemble() const noexcept { return *ensemble_; }
  std::shared_ptr<const SnapshotEnsemble> shared_ensemble() const noexcept {
    return ensemble_;
  }

  double operator()(double x) const;

 private:
  std::shared_ptr<const SnapshotEnsemble> ensemble_;
  GaussianKernel kernel_;
  double lambda_;
  Eigen::VectorXd alpha_;
  PairingMode pairing_;
  bool used_fallback_;
  // Weight on mean_j K(x, y_a^(j)) per (group, time) node, folded from alpha
  // and the trapezoid weights of the two intervals sharing the node.
  std::vector<double> node_weights_;
};

DriftModel fit_drift(const SnapshotEnsemble& ensemble,
                     const GaussianKernel& kern, double lambda,
                     PairingMode pairing = PairingMode::independent_copies);

DriftModel fit_drift(std::shared_ptr<const SnapshotEnsemble> ensemble,
                     const GaussianKernel& kern, double lambda,
                     PairingMode pairing = PairingMode::independent_copies);

inline double eval_drift(const DriftModel& model, double x) {
  return model(x);
}

/// Pointwise evaluation over a grid, in parallel.
Eigen::VectorXd eval_drift(const DriftModel& model, std::span<const double> xs);

/// J(alpha) = (1/N) ||L* alpha - targets||^2 + lambda alpha^T L* alpha.
double drift_cost(const Eigen::MatrixXd& gram, const Eigen::VectorXd& targets,
                  const Eigen::VectorXd& alpha, double lambda);

/// Cost of a fitted model on an ensemble, rebuilding L* with the model's
/// kernel and pairing.
double drift_cost(const DriftModel& model, const SnapshotEnsemble& ensemble);

}  // namespace sokid
