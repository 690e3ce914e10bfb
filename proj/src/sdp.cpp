#include "sokid/sdp.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "sokid/error.hpp"

namespace sokid::sdp {

namespace {

void require_dense_size(Eigen::Index dim) {
  if (dim > max_dense_dimension) {
    throw Error(ErrorKind::validation,
                "matrix dimension " + std::to_string(dim) +
                    " exceeds the dense eigensolver limit of " +
                    std::to_string(max_dense_dimension));
  }
}

bool exactly_symmetric(const Eigen::MatrixXd& M) {
  return M.rows() == M.cols() && M == M.transpose();
}

// Per-block Cholesky factors at one point; empty optional-like flag when
// some block is not positive definite.
struct Factored {
  bool feasible = false;
  double log_det = 0.0;
  std::vector<Eigen::MatrixXd> inv_factor;  // W = L^{-1}, S^{-1} = W^T W
};

Factored factor_blocks(const MatrixPencil& pencil, const Eigen::VectorXd& x,
                       bool want_inverse) {
  Factored out;
  if (!x.allFinite()) return out;
  for (std::size_t b = 0; b < pencil.blocks().size(); ++b) {
    const Eigen::MatrixXd S = pencil.evaluate_block(b, x);
    if (S.rows() == 0) {
      if (want_inverse) out.inv_factor.emplace_back();
      continue;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) return out;
    const Eigen::MatrixXd L = llt.matrixL();
    const Eigen::VectorXd diag = L.diagonal();
    if ((diag.array() <= 0.0).any() || !diag.allFinite()) return out;
    out.log_det += 2.0 * diag.array().log().sum();
    if (want_inverse) {
      out.inv_factor.push_back(
          L.triangularView<Eigen::Lower>().solve(
              Eigen::MatrixXd::Identity(S.rows(), S.cols())));
    }
  }
  out.feasible = std::isfinite(out.log_det);
  return out;
}

double barrier_value(const MatrixPencil& pencil, const Eigen::VectorXd& x,
                     double weight, bool* feasible) {
  const Factored f = factor_blocks(pencil, x, false);
  *feasible = f.feasible;
  if (!f.feasible) return std::numeric_limits<double>::infinity();
  return weight * x(0) - f.log_det;
}

}  // namespace

MatrixPencil::MatrixPencil(std::size_t variables,
                           std::vector<PencilBlock> blocks)
    : variables_(variables), blocks_(std::move(blocks)) {
  if (variables_ == 0) {
    throw Error(ErrorKind::validation, "pencil needs at least one variable");
  }
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const auto& block = blocks_[b];
    const std::string where = "pencil block " + std::to_string(b);
    if (!exactly_symmetric(block.constant)) {
      throw Error(ErrorKind::validation, where + ": constant part is not symmetric");
    }
    if (block.coefficients.size() != variables_) {
      throw Error(ErrorKind::validation,
                  where + ": expected " + std::to_string(variables_) +
                      " coefficient matrices, got " +
                      std::to_string(block.coefficients.size()));
    }
    for (std::size_t k = 0; k < variables_; ++k) {
      const auto& F = block.coefficients[k];
      if (F.rows() != block.dimension() || !exactly_symmetric(F)) {
        throw Error(ErrorKind::validation,
                    where + ": coefficient " + std::to_string(k) +
                        " is not a symmetric matrix of the block's dimension");
      }
    }
  }
}

Eigen::Index MatrixPencil::barrier_degree() const noexcept {
  Eigen::Index degree = 0;
  for (const auto& block : blocks_) degree += block.dimension();
  return degree;
}

Eigen::MatrixXd MatrixPencil::evaluate_block(std::size_t block,
                                             const Eigen::VectorXd& x) const {
  const auto& blk = blocks_[block];
  Eigen::MatrixXd S = blk.constant;
  for (std::size_t k = 0; k < variables_; ++k) {
    const double xk = x(static_cast<Eigen::Index>(k));
    if (xk != 0.0) S.noalias() += xk * blk.coefficients[k];
  }
  return S;
}

std::vector<Eigen::MatrixXd> MatrixPencil::evaluate(
    const Eigen::VectorXd& x) const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(blocks_.size());
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    out.push_back(evaluate_block(b, x));
  }
  return out;
}

void MatrixPencil::add_ridge(std::size_t block, double ridge) {
  blocks_[block].constant.diagonal().array() += ridge;
}

std::string to_string(Status status) {
  switch (status) {
    case Status::optimal:
      return "optimal";
    case Status::max_iterations:
      return "max_iterations";
    case Status::infeasible_start:
      return "infeasible_start";
  }
  return "unknown";
}

double min_eig(const Eigen::MatrixXd& M) {
  require_dense_size(M.rows());
  if (M.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  return eig.eigenvalues()(0);
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& A, double rank_tol) {
  require_dense_size(A.rows());
  const Eigen::Index N = A.rows();
  if (N == 0) return Eigen::MatrixXd(0, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double top = values(N - 1);
  if (values(0) < -rank_tol * std::max(top, 0.0) &&
      !(top <= 0.0 && values(0) == 0.0)) {
    throw Error(ErrorKind::numerical,
                "matrix is indefinite: min eigenvalue " +
                    std::to_string(values(0)) + " vs max " +
                    std::to_string(top));
  }
  if (top <= 0.0) return Eigen::MatrixXd(0, N);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = N - 1; i >= 0; --i) {
    if (values(i) > rank_tol * top) kept.push_back(i);
  }
  Eigen::MatrixXd P(static_cast<Eigen::Index>(kept.size()), N);
  for (std::size_t r = 0; r < kept.size(); ++r) {
    P.row(static_cast<Eigen::Index>(r)) =
        std::sqrt(values(kept[r])) * eig.eigenvectors().col(kept[r]).transpose();
  }
  return P;
}

MatrixPencil assemble_schur_lmi(const Eigen::MatrixXd& P,
                                const Eigen::VectorXd& b, double c,
                                const std::vector<Eigen::MatrixXd>& mats) {
  const Eigen::Index N = b.size();
  const Eigen::Index r = P.rows();
  if (P.cols() != N || static_cast<Eigen::Index>(mats.size()) != N || N == 0) {
    throw Error(ErrorKind::validation,
                "Schur LMI shape mismatch: P is " + std::to_string(P.rows()) +
                    "x" + std::to_string(P.cols()) + ", b has " +
                    std::to_string(N) + " entries, " +
                    std::to_string(mats.size()) + " moment matrices");
  }
  const Eigen::Index p = mats.front().rows();
  for (const auto& M : mats) {
    if (M.rows() != p || M.cols() != p) {
      throw Error(ErrorKind::validation,
                  "Schur LMI shape mismatch: moment matrices differ in size");
    }
  }

  const auto m = static_cast<std::size_t>(N + 1);
  PencilBlock epigraph;
  epigraph.constant = Eigen::MatrixXd::Zero(r + 1, r + 1);
  epigraph.constant(0, 0) = -c;
  epigraph.constant.bottomRightCorner(r, r).setIdentity();
  epigraph.coefficients.reserve(m);
  Eigen::MatrixXd Ft = Eigen::MatrixXd::Zero(r + 1, r + 1);
  Ft(0, 0) = 1.0;
  epigraph.coefficients.push_back(std::move(Ft));
  for (Eigen::Index i = 0; i < N; ++i) {
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(r + 1, r + 1);
    F(0, 0) = -b(i);
    F.block(1, 0, r, 1) = P.col(i);
    F.block(0, 1, 1, r) = P.col(i).transpose();
    epigraph.coefficients.push_back(std::move(F));
  }

  PencilBlock cone;
  cone.constant = Eigen::MatrixXd::Zero(p, p);
  cone.coefficients.reserve(m);
  cone.coefficients.push_back(Eigen::MatrixXd::Zero(p, p));
  for (const auto& M : mats) cone.coefficients.push_back(M);

  return MatrixPencil(m, {std::move(epigraph), std::move(cone)});
}

SchurStart schur_feasible_start(MatrixPencil& pencil, const Eigen::MatrixXd& P,
                                const Eigen::VectorXd& b, double c,
                                const std::vector<Eigen::MatrixXd>& mats,
                                const Eigen::VectorXd& alpha) {
  const Eigen::Index N = b.size();
  if (alpha.size() != N || static_cast<Eigen::Index>(mats.size()) != N) {
    throw Error(ErrorKind::validation, "start point has wrong dimension");
  }
  SchurStart start;
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(mats.front().rows(),
                                                mats.front().cols());
  double weight = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    total += alpha(i) * mats[static_cast<std::size_t>(i)];
    weight += std::abs(alpha(i)) * mats[static_cast<std::size_t>(i)].trace();
  }
  if (min_eig(total) <= 1e-12 * (1.0 + weight)) {
    pencil.add_ridge(1, 1e-8);
    start.ridge_added = true;
  }

  const double epigraph = (P * alpha).squaredNorm() + b.dot(alpha) + c;
  start.x.resize(N + 1);
  start.x(0) = epigraph + 1.0;
  start.x.tail(N) = alpha;
  return start;
}

SchurStart schur_feasible_start(MatrixPencil& pencil, const Eigen::MatrixXd& P,
                                const Eigen::VectorXd& b, double c,
                                const std::vector<Eigen::MatrixXd>& mats,
                                double scale) {
  return schur_feasible_start(pencil, P, b, c, mats,
                              Eigen::VectorXd::Constant(b.size(), scale));
}

namespace {

// Rejects Cholesky factors with pivots tiny relative to the largest one.
bool pivots_ok(const Eigen::MatrixXd& L) {
  const Eigen::VectorXd d = L.diagonal().array().square();
  return d.minCoeff() > 1e-14 * d.maxCoeff();
}

}  // namespace

Solution solve(const MatrixPencil& pencil, const Eigen::VectorXd& start,
               const Options& options) {
  const auto m = static_cast<Eigen::Index>(pencil.variables());
  if (start.size() != m) {
    throw Error(ErrorKind::validation, "start point has wrong dimension");
  }
  Solution sol;
  sol.x = start;
  const double degree = static_cast<double>(pencil.barrier_degree());

  auto finish = [&](Status status, double mu) {
    sol.status = status;
    sol.objective = sol.x(0);
    sol.gap = degree * mu;
    sol.block_min_eig.clear();
    for (const auto& S : pencil.evaluate(sol.x)) {
      sol.block_min_eig.push_back(min_eig(S));
    }
    return sol;
  };

  if (!factor_blocks(pencil, sol.x, false).feasible) {
    return finish(Status::infeasible_start,
                  std::numeric_limits<double>::infinity());
  }

  double mu = options.mu0;
  Eigen::MatrixXd H(m, m);
  Eigen::VectorXd g(m);
  for (;;) {
    const double weight = 1.0 / mu;
    // Centering: damped Newton on weight * x_0 - log det F(x).
    for (;;) {
      if (sol.newton_steps >= options.max_iter) {
        return finish(Status::max_iterations, mu);
      }
      const Factored f = factor_blocks(pencil, sol.x, true);
      H.setZero();
      g.setZero();
      g(0) = weight;
      for (std::size_t b = 0; b < pencil.blocks().size(); ++b) {
        const auto& blk = pencil.blocks()[b];
        const Eigen::Index d = blk.dimension();
        if (d == 0) continue;
        const Eigen::MatrixXd& W = f.inv_factor[b];
        // Column k holds vec(W F_k W^T); H += B^T B, g -= trace terms.
        Eigen::MatrixXd B(d * d, m);
        for (Eigen::Index k = 0; k < m; ++k) {
          const Eigen::MatrixXd G =
              W * blk.coefficients[static_cast<std::size_t>(k)] * W.transpose();
          g(k) -= G.trace();
          B.col(k) = Eigen::Map<const Eigen::VectorXd>(G.data(), d * d);
        }
        H.selfadjointView<Eigen::Lower>().rankUpdate(B.transpose());
      }
      H = H.selfadjointView<Eigen::Lower>();

      // When the Hessian is singular along directions that leave F
      // unchanged, a tiny ridge picks the minimum-norm step.
      Eigen::LLT<Eigen::MatrixXd> llt(H);
      if (llt.info() != Eigen::Success || !pivots_ok(llt.matrixLLT())) {
        const double ridge =
            1e-12 * std::max(H.trace() / static_cast<double>(m), 1e-300);
        H.diagonal().array() += ridge;
        llt.compute(H);
      }
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::solver, "Newton system is not positive definite");
      }
      const Eigen::VectorXd step = -llt.solve(g);
      const double slope = g.dot(step);
      const double decrement2 = -slope;
      if (!(decrement2 > 2.0 * options.centering_tol)) break;

      bool feasible = false;
      const double current = barrier_value(pencil, sol.x, weight, &feasible);
      double s = 1.0;
      bool moved = false;
      bool stalled = false;
      while (s > 1e-20) {
        const Eigen::VectorXd trial = sol.x + s * step;
        const double value = barrier_value(pencil, trial, weight, &feasible);
        if (feasible && value <= current + options.armijo * s * slope) {
          sol.x = trial;
          moved = true;
          // Below this the decrement is rounding noise, not distance to
          // the center.
          stalled = current - value <=
                    64.0 * std::numeric_limits<double>::epsilon() *
                        std::max(1.0, std::abs(current));
          break;
        }
        s *= options.shrink;
      }
      ++sol.newton_steps;
      if (options.observer) {
        options.observer({sol.outer_iterations, sol.newton_steps, mu, &sol.x});
      }
      if (!moved || stalled) break;  // no descent left at working precision
    }

    ++sol.outer_iterations;
    sol.path_objectives.push_back(sol.x(0));
    if (degree * mu <= options.tol) return finish(Status::optimal, mu);
    mu *= options.mu_factor;
  }
}

}  // namespace sokid::sdp
