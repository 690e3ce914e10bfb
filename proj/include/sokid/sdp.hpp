#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sokid::sdp {

/// Largest matrix dimension the dense eigensolvers accept.
inline constexpr Eigen::Index max_dense_dimension = 2000;

/// One diagonal block of F(x) = F0 + sum_k x_k F_k.
struct PencilBlock {
  Eigen::MatrixXd constant;
  std::vector<Eigen::MatrixXd> coefficients;  // one per variable

  Eigen::Index dimension() const noexcept { return constant.rows(); }
};

/// Block-diagonal affine matrix pencil in m variables.
class MatrixPencil {
 public:
  MatrixPencil() = default;
  /// Throws Error(validation) on mismatched shapes or unsymmetric matrices.
  MatrixPencil(std::size_t variables, std::vector<PencilBlock> blocks);

  std::size_t variables() const noexcept { return variables_; }
  const std::vector<PencilBlock>& blocks() const noexcept { return blocks_; }
  /// Sum of block dimensions; the barrier's degree.
  Eigen::Index barrier_degree() const noexcept;

  Eigen::MatrixXd evaluate_block(std::size_t block,
                                 const Eigen::VectorXd& x) const;
  std::vector<Eigen::MatrixXd> evaluate(const Eigen::VectorXd& x) const;

  /// Adds `ridge * I` to the constant part of one block.
  void add_ridge(std::size_t block, double ridge);

 private:
  std::size_t variables_ = 0;
  std::vector<PencilBlock> blocks_;
};

enum class Status { optimal, max_iterations, infeasible_start };

std::string to_string(Status status);

struct Solution {
  Eigen::VectorXd x;
  double objective = 0.0;
  Status status = Status::infeasible_start;
  /// Duality-gap bound barrier_degree * mu at the last centered point.
  double gap = 0.0;
  std::vector<double> block_min_eig;
  int newton_steps = 0;
  int outer_iterations = 0;
  /// Objective after each centering, in order.
  std::vector<double> path_objectives;
};

/// Snapshot passed to the optional iterate observer.
struct Iterate {
  int outer = 0;
  int newton = 0;
  double mu = 0.0;
  const Eigen::VectorXd* x = nullptr;
};

struct Options {
  double tol = 1e-7;
  int max_iter = 500;  // Newton steps over all outer iterations
  double mu0 = 1.0;
  double mu_factor = 0.1;
  double armijo = 0.25;
  double shrink = 0.5;
  double centering_tol = 1e-10;  // on half the squared Newton decrement
  std::function<void(const Iterate&)> observer;
};

/// Smallest eigenvalue of a symmetric matrix.
double min_eig(const Eigen::MatrixXd& M);

/// Rank-revealing factor P (r x N) with P^T P = A, rows sqrt(l_i) v_i^T for
/// eigenvalues l_i > rank_tol * l_max. Throws Error(numerical) when A has
/// an eigenvalue below -rank_tol * l_max.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& A, double rank_tol = 1e-10);

/// Pencil in (t, alpha_1..alpha_N) for
///   [ t - b^T alpha - c   alpha^T P^T ]
///   [ P alpha             I_r         ]  (+)  sum_i alpha_i M_i  >= 0.
/// Block 0 has dimension r + 1, block 1 has dimension p.
MatrixPencil assemble_schur_lmi(const Eigen::MatrixXd& P,
                                const Eigen::VectorXd& b, double c,
                                const std::vector<Eigen::MatrixXd>& mats);

/// Strictly feasible point for an assembled Schur LMI: alpha = scale * 1 and
/// t one above the epigraph. If sum_i M_i is singular the pencil's second
/// block receives a 1e-8 ridge and `ridge_added` is set.
struct SchurStart {
  Eigen::VectorXd x;
  bool ridge_added = false;
};
SchurStart schur_feasible_start(MatrixPencil& pencil, const Eigen::MatrixXd& P,
                                const Eigen::VectorXd& b, double c,
                                const std::vector<Eigen::MatrixXd>& mats,
                                double scale = 1.0);
/// Same, starting from an explicit alpha; the ridge is added when
/// sum_i alpha_i M_i is not positive definite.
SchurStart schur_feasible_start(MatrixPencil& pencil, const Eigen::MatrixXd& P,
                                const Eigen::VectorXd& b, double c,
                                const std::vector<Eigen::MatrixXd>& mats,
                                const Eigen::VectorXd& alpha);

/// Minimizes x_0 subject to pencil(x) >= 0 with a log-det barrier
/// path-following method, starting from a strictly feasible `start`.
Solution solve(const MatrixPencil& pencil, const Eigen::VectorXd& start,
               const Options& options = {});

}  // namespace sokid::sdp
