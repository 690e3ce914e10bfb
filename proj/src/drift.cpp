#include "sokid/drift.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "sokid/error.hpp"

namespace sokid {

namespace {

void require_pairs(const SnapshotEnsemble& ensemble, PairingMode pairing) {
  if (pairing != PairingMode::independent_copies) return;
  for (std::size_t g = 0; g < ensemble.group_count(); ++g) {
    if (ensemble.group(g).trajectories() < 2) {
      throw Error(ErrorKind::validation,
                  "group " + std::to_string(g) + " has " +
                      std::to_string(ensemble.group(g).trajectories()) +
                      " trajectory; the independent-copy estimator needs k >= 2");
    }
  }
}

// Empirical E[K(x_s, x_t)] between the states of group u at time index a and
// group v at time index b.
double pair_expectation(const SnapshotEnsemble& ensemble,
                        const GaussianKernel& kern, std::size_t u,
                        Eigen::Index a, std::size_t v, Eigen::Index b,
                        PairingMode pairing) {
  const auto& yu = ensemble.group(u).snapshots;
  const auto& yv = ensemble.group(v).snapshots;
  const bool skip_diagonal =
      u == v && pairing == PairingMode::independent_copies;
  double sum = 0.0;
  for (Eigen::Index j1 = 0; j1 < yu.rows(); ++j1) {
    const double xs = yu(j1, a);
    for (Eigen::Index j2 = 0; j2 < yv.rows(); ++j2) {
      if (skip_diagonal && j1 == j2) continue;
      sum += kern(xs, yv(j2, b));
    }
  }
  const double ku = static_cast<double>(yu.rows());
  const double kv = static_cast<double>(yv.rows());
  return sum / (skip_diagonal ? ku * (ku - 1.0) : ku * kv);
}

}  // namespace

OccupationGram occupation_gram(const SnapshotEnsemble& ensemble,
                               const GaussianKernel& kern,
                               PairingMode pairing) {
  validate(ensemble);
  require_pairs(ensemble, pairing);

  const std::size_t n = ensemble.intervals();
  const std::size_t points = n + 1;
  const std::size_t groups = ensemble.group_count();
  const auto nodes = static_cast<std::int64_t>(groups * points);

  // Expectation at every (group, time) node pair; upper triangle, mirrored.
  Eigen::MatrixXd node(nodes, nodes);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t p = 0; p < nodes; ++p) {
    const auto u = static_cast<std::size_t>(p) / points;
    const auto a = static_cast<Eigen::Index>(static_cast<std::size_t>(p) % points);
    for (std::int64_t q = p; q < nodes; ++q) {
      const auto v = static_cast<std::size_t>(q) / points;
      const auto b =
          static_cast<Eigen::Index>(static_cast<std::size_t>(q) % points);
      node(p, q) = pair_expectation(ensemble, kern, u, a, v, b, pairing);
    }
  }
  for (std::int64_t p = 0; p < nodes; ++p) {
    for (std::int64_t q = p + 1; q < nodes; ++q) node(q, p) = node(p, q);
  }

  const auto& grid = ensemble.grid();
  const auto N = static_cast<std::int64_t>(ensemble.functional_count());
  OccupationGram gram;
  gram.index = ensemble.functional_index();
  gram.matrix.resize(N, N);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < N; ++i) {
    const auto fi = ensemble.functional(static_cast<std::size_t>(i));
    const auto pi = static_cast<Eigen::Index>(fi.group * points + fi.interval);
    const double wi = grid.width(fi.interval);
    for (std::int64_t j = i; j < N; ++j) {
      const auto fj = ensemble.functional(static_cast<std::size_t>(j));
      const auto pj = static_cast<Eigen::Index>(fj.group * points + fj.interval);
      const double wj = grid.width(fj.interval);
      const double corners = node(pi - 1, pj - 1) + node(pi - 1, pj) +
                             node(pi, pj - 1) + node(pi, pj);
      gram.matrix(i, j) = 0.25 * wi * wj * corners;
    }
  }
  for (std::int64_t i = 0; i < N; ++i) {
    for (std::int64_t j = i + 1; j < N; ++j) {
      gram.matrix(j, i) = gram.matrix(i, j);
    }
  }
  return gram;
}

double representer_eval(const SnapshotEnsemble& ensemble,
                        const GaussianKernel& kern, std::size_t row,
                        double x) {
  if (row >= ensemble.functional_count()) {
    throw Error(ErrorKind::validation,
                "functional index " + std::to_string(row) + " out of range");
  }
  const auto f = ensemble.functional(row);
  const auto& y = ensemble.group(f.group).snapshots;
  const auto b = static_cast<Eigen::Index>(f.interval);
  double left = 0.0;
  double right = 0.0;
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    left += kern(x, y(j, b - 1));
    right += kern(x, y(j, b));
  }
  const double k = static_cast<double>(y.rows());
  return 0.5 * ensemble.grid().width(f.interval) * (left / k + right / k);
}

RidgeSolution solve_ridge(const Eigen::MatrixXd& gram,
                          const Eigen::VectorXd& targets, double lambda) {
  const Eigen::Index N = targets.size();
  if (gram.rows() != N || gram.cols() != N) {
    throw Error(ErrorKind::validation, "ridge system shape mismatch");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::validation, "lambda must be finite and >= 0");
  }
  if (!gram.allFinite() || !targets.allFinite()) {
    throw Error(ErrorKind::numerical, "non-finite entries in the ridge system");
  }

  constexpr double pivot_tol = 1e-14;
  Eigen::MatrixXd system = gram;
  system.diagonal().array() += lambda * static_cast<double>(N);

  RidgeSolution out;
  const double max_diag = system.diagonal().cwiseAbs().maxCoeff();
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  bool accepted = llt.info() == Eigen::Success;
  if (accepted) {
    const Eigen::VectorXd pivots = llt.matrixL().toDenseMatrix().diagonal();
    accepted = pivots.array().square().minCoeff() > pivot_tol * max_diag;
  }
  if (accepted) {
    out.alpha = llt.solve(targets);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(system);
    const Eigen::VectorXd& values = eig.eigenvalues();
    // The independent-copy Gram can be mildly indefinite, so small
    // eigenvalues are judged by magnitude.
    const double scale = values.cwiseAbs().maxCoeff();
    if (lambda == 0.0 && values.cwiseAbs().minCoeff() <= pivot_tol * scale) {
      throw Error(ErrorKind::numerical,
                  "occupation Gram matrix is singular at lambda = 0 "
                  "(smallest eigenvalue magnitude " +
                      std::to_string(values.cwiseAbs().minCoeff()) + ")");
    }
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(N);
    for (Eigen::Index i = 0; i < N; ++i) {
      if (std::abs(values(i)) > pivot_tol * scale) inv(i) = 1.0 / values(i);
    }
    const auto& V = eig.eigenvectors();
    out.alpha = V * inv.asDiagonal() * (V.transpose() * targets);
    out.used_fallback = true;
  }
  out.residual_norm = (system * out.alpha - targets).norm();
  return out;
}

DriftModel::DriftModel(std::shared_ptr<const SnapshotEnsemble> ensemble,
                       GaussianKernel kern, double lambda,
                       Eigen::VectorXd alpha, PairingMode pairing,
                       bool used_fallback)
    : ensemble_(std::move(ensemble)),
      kernel_(kern),
      lambda_(lambda),
      alpha_(std::move(alpha)),
      pairing_(pairing),
      used_fallback_(used_fallback) {
  if (!ensemble_) {
    throw Error(ErrorKind::validation, "drift model needs a reference ensemble");
  }
  if (static_cast<std::size_t>(alpha_.size()) != ensemble_->functional_count()) {
    throw Error(ErrorKind::validation,
                "drift coefficient count " + std::to_string(alpha_.size()) +
                    " does not match functional count " +
                    std::to_string(ensemble_->functional_count()));
  }
  const std::size_t n = ensemble_->intervals();
  const std::size_t points = n + 1;
  node_weights_.assign(ensemble_->group_count() * points, 0.0);
  for (std::size_t row = 0; row < ensemble_->functional_count(); ++row) {
    const auto f = ensemble_->functional(row);
    const double half = 0.5 * alpha_(static_cast<Eigen::Index>(row)) *
                        ensemble_->grid().width(f.interval);
    node_weights_[f.group * points + f.interval - 1] += half;
    node_weights_[f.group * points + f.interval] += half;
  }
}

double DriftModel::operator()(double x) const {
  const std::size_t points = ensemble_->intervals() + 1;
  double value = 0.0;
  for (std::size_t g = 0; g < ensemble_->group_count(); ++g) {
    const auto& y = ensemble_->group(g).snapshots;
    const double k = static_cast<double>(y.rows());
    for (std::size_t a = 0; a < points; ++a) {
      const double w = node_weights_[g * points + a];
      if (w == 0.0) continue;
      double sum = 0.0;
      for (Eigen::Index j = 0; j < y.rows(); ++j) {
        sum += kernel_(x, y(j, static_cast<Eigen::Index>(a)));
      }
      value += w * (sum / k);
    }
  }
  return value;
}

DriftModel fit_drift(std::shared_ptr<const SnapshotEnsemble> ensemble,
                     const GaussianKernel& kern, double lambda,
                     PairingMode pairing) {
  const auto gram = occupation_gram(*ensemble, kern, pairing);
  const auto targets = mean_increments(*ensemble);
  auto solution = solve_ridge(gram.matrix, targets.mean_increments, lambda);
  return DriftModel(std::move(ensemble), kern, lambda,
                    std::move(solution.alpha), pairing,
                    solution.used_fallback);
}

DriftModel fit_drift(const SnapshotEnsemble& ensemble,
                     const GaussianKernel& kern, double lambda,
                     PairingMode pairing) {
  return fit_drift(std::make_shared<const SnapshotEnsemble>(ensemble), kern,
                   lambda, pairing);
}

Eigen::VectorXd eval_drift(const DriftModel& model,
                           std::span<const double> xs) {
  const auto count = static_cast<std::int64_t>(xs.size());
  Eigen::VectorXd out(count);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    out(i) = model(xs[static_cast<std::size_t>(i)]);
  }
  return out;
}

double drift_cost(const Eigen::MatrixXd& gram, const Eigen::VectorXd& targets,
                  const Eigen::VectorXd& alpha, double lambda) {
  const Eigen::VectorXd fitted = gram * alpha;
  const double N = static_cast<double>(targets.size());
  return (fitted - targets).squaredNorm() / N + lambda * alpha.dot(fitted);
}

double drift_cost(const DriftModel& model, const SnapshotEnsemble& ensemble) {
  const auto gram = occupation_gram(ensemble, model.kernel(), model.pairing());
  const auto targets = mean_increments(ensemble);
  return drift_cost(gram.matrix, targets.mean_increments, model.alpha(),
                    model.lambda());
}

}  // namespace sokid
