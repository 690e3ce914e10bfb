#include "sokid/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>

#include <json.hpp>

#include "sokid/error.hpp"
#include "sokid/io.hpp"

namespace sokid {

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

void dump_sdp(const std::filesystem::path& path, const sdp::MatrixPencil& pencil,
              const std::vector<nlohmann::json>& iterates,
              const sdp::Solution& sol) {
  nlohmann::json doc;
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& block : pencil.blocks()) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (const auto& F : block.coefficients) coeffs.push_back(matrix_json(F));
    blocks.push_back({{"constant", matrix_json(block.constant)},
                      {"coefficients", std::move(coeffs)}});
  }
  doc["variables"] = pencil.variables();
  doc["blocks"] = std::move(blocks);
  doc["iterates"] = iterates;
  doc["status"] = sdp::to_string(sol.status);
  doc["objective"] = sol.objective;
  doc["gap"] = sol.gap;
  write_text(path, doc.dump(1) + "\n");
}

}  // namespace

ResidualTargets residual_targets(const SnapshotEnsemble& ensemble,
                                 const DriftFunction& drift) {
  validate(ensemble);
  const std::size_t groups = ensemble.group_count();

  // Drift at every observed state, once.
  std::vector<Eigen::MatrixXd> fvals(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const auto& y = ensemble.group(g).snapshots;
    fvals[g].resize(y.rows(), y.cols());
    const auto count = static_cast<std::int64_t>(y.size());
    const double* src = y.data();
    double* dst = fvals[g].data();
#pragma omp parallel for schedule(static)
    for (std::int64_t e = 0; e < count; ++e) dst[e] = drift(src[e]);
  }

  ResidualTargets out;
  out.index = ensemble.functional_index();
  out.z.resize(static_cast<Eigen::Index>(ensemble.functional_count()));
  const auto N = static_cast<std::int64_t>(ensemble.functional_count());
#pragma omp parallel for schedule(static)
  for (std::int64_t row = 0; row < N; ++row) {
    const auto f = ensemble.functional(static_cast<std::size_t>(row));
    const auto& y = ensemble.group(f.group).snapshots;
    const auto& fy = fvals[f.group];
    const auto i = static_cast<Eigen::Index>(f.interval);
    const double half = 0.5 * ensemble.grid().width(f.interval);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      const double r =
          y(j, i) - y(j, i - 1) - half * (fy(j, i - 1) + fy(j, i));
      sum += r * r;
    }
    out.z(row) = sum / static_cast<double>(y.rows());
  }
  return out;
}

Eigen::MatrixXd frobenius_gram(const std::vector<Eigen::MatrixXd>& mats) {
  const auto N = static_cast<std::int64_t>(mats.size());
  Eigen::MatrixXd gram(N, N);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < N; ++i) {
    const auto& Mi = mats[static_cast<std::size_t>(i)];
    for (std::int64_t j = i; j < N; ++j) {
      gram(i, j) = (Mi.array() * mats[static_cast<std::size_t>(j)].transpose().array()).sum();
    }
  }
  for (std::int64_t i = 0; i < N; ++i) {
    for (std::int64_t j = i + 1; j < N; ++j) gram(j, i) = gram(i, j);
  }
  return gram;
}

MomentMatrices moment_matrices(const SnapshotEnsemble& ensemble,
                               const FeatureMap& spec) {
  validate(ensemble);
  const int p = spec.dimension();
  const std::size_t points = ensemble.intervals() + 1;
  const std::size_t groups = ensemble.group_count();

  // mean_j phi(y_a^(j)) phi(y_a^(j))^T at every (group, time) node.
  const auto nodes = static_cast<std::int64_t>(groups * points);
  std::vector<Eigen::MatrixXd> node(static_cast<std::size_t>(nodes));
#pragma omp parallel for schedule(static)
  for (std::int64_t q = 0; q < nodes; ++q) {
    const auto g = static_cast<std::size_t>(q) / points;
    const auto a = static_cast<Eigen::Index>(static_cast<std::size_t>(q) % points);
    const auto& y = ensemble.group(g).snapshots;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      const Eigen::VectorXd phi = spec(y(j, a));
      acc.noalias() += phi * phi.transpose();
    }
    node[static_cast<std::size_t>(q)] = acc / static_cast<double>(y.rows());
  }

  MomentMatrices out;
  const auto N = static_cast<std::int64_t>(ensemble.functional_count());
  out.mats.resize(static_cast<std::size_t>(N));
#pragma omp parallel for schedule(static)
  for (std::int64_t row = 0; row < N; ++row) {
    const auto f = ensemble.functional(static_cast<std::size_t>(row));
    const std::size_t q = f.group * points + f.interval;
    out.mats[static_cast<std::size_t>(row)] =
        0.5 * ensemble.grid().width(f.interval) * (node[q - 1] + node[q]);
  }
  out.gram = frobenius_gram(out.mats);
  return out;
}

QuadraticCost assemble_qp(const MomentMatrices& moments,
                          const ResidualTargets& targets, double lambda) {
  const Eigen::Index N = targets.z.size();
  if (moments.gram.rows() != N || moments.gram.cols() != N ||
      static_cast<Eigen::Index>(moments.mats.size()) != N) {
    throw Error(ErrorKind::validation,
                "moment Gram is " + std::to_string(moments.gram.rows()) +
                    "x" + std::to_string(moments.gram.cols()) + " but there are " +
                    std::to_string(N) + " targets");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::validation, "lambda must be finite and >= 0");
  }
  const Eigen::MatrixXd& M = moments.gram;
  QuadraticCost qp;
  qp.A = M * M + (static_cast<double>(N) * lambda) * M;
  qp.A = 0.5 * (qp.A + qp.A.transpose()).eval();
  qp.b = -2.0 * (M * targets.z);
  qp.c = targets.z.squaredNorm();
  return qp;
}

DiffusionModel::DiffusionModel(FeatureMap features, Eigen::MatrixXd Q,
                               double lambda, Eigen::VectorXd alpha,
                               DiffusionDiagnostics diag)
    : features_(features),
      lambda_(lambda),
      alpha_(std::move(alpha)),
      diag_(diag) {
  const int p = features_.dimension();
  if (Q.rows() != p || Q.cols() != p) {
    throw Error(ErrorKind::validation,
                "Q must be " + std::to_string(p) + "x" + std::to_string(p));
  }
  if (!Q.allFinite()) {
    throw Error(ErrorKind::numerical, "Q has non-finite entries");
  }
  const Eigen::MatrixXd sym = 0.5 * (Q + Q.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd values = eig.eigenvalues();
  clamp_ = std::max(0.0, -values.minCoeff());
  std::vector<Eigen::Index> positive;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) > 0.0) positive.push_back(i);
  }
  factor_.resize(p, static_cast<Eigen::Index>(positive.size()));
  for (std::size_t r = 0; r < positive.size(); ++r) {
    factor_.col(static_cast<Eigen::Index>(r)) =
        std::sqrt(values(positive[r])) * eig.eigenvectors().col(positive[r]);
  }
  if (clamp_ > 0.0) {
    Q_ = factor_ * factor_.transpose();
    Q_ = 0.5 * (Q_ + Q_.transpose()).eval();
  } else {
    Q_ = sym;
  }
}

double DiffusionModel::sigma_squared(double x) const {
  const Eigen::VectorXd phi = features_(x);
  double total = 0.0;
  for (Eigen::Index r = 0; r < factor_.cols(); ++r) {
    const double s = factor_.col(r).dot(phi);
    total += s * s;
  }
  return total;
}

double DiffusionModel::sigma(double x) const {
  return std::sqrt(sigma_squared(x));
}

Eigen::VectorXd eval_diffusion(const DiffusionModel& model,
                               std::span<const double> xs) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = model.sigma(xs[i]);
  }
  return out;
}

DiffusionModel fit_diffusion(const MomentMatrices& moments,
                             const ResidualTargets& targets,
                             const FeatureMap& spec, double lambda,
                             const DiffusionFitOptions& options) {
  const QuadraticCost qp = assemble_qp(moments, targets, lambda);
  const Eigen::Index N = targets.z.size();
  const int p = spec.dimension();
  for (const auto& M : moments.mats) {
    if (M.rows() != p || M.cols() != p) {
      throw Error(ErrorKind::validation,
                  "moment matrices do not match the feature dimension");
    }
  }

  // The LMI sees alpha only through <M_i, .>, so alpha = U beta with U an
  // orthonormal basis of range(M) loses nothing and leaves at most
  // p(p+1)/2 unknowns. Without it the Newton system is singular in all but
  // a handful of directions.
  DiffusionDiagnostics diag;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigM(moments.gram);
  const double gram_top = std::max(eigM.eigenvalues().maxCoeff(), 0.0);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = N - 1; i >= 0; --i) {
    if (eigM.eigenvalues()(i) > options.rank_tol * gram_top) kept.push_back(i);
  }
  if (kept.empty()) kept.push_back(N - 1);  // all-zero moments
  const auto R = static_cast<Eigen::Index>(kept.size());
  Eigen::MatrixXd U(N, R);
  for (Eigen::Index k = 0; k < R; ++k) U.col(k) = eigM.eigenvectors().col(kept[static_cast<std::size_t>(k)]);
  diag.reduced_dimension = R;

  // The solver also works on a normalized copy: objective divided by
  // ||z||^2 and beta = variable_scale * gamma, so that the cost at zero is 1
  // and the quadratic term has unit spectral radius. The PSD block is scaled
  // by a positive constant, which leaves the constraint unchanged.
  diag.cost_scale = qp.c > 0.0 ? qp.c : 1.0;
  const Eigen::MatrixXd A_red = U.transpose() * qp.A * U;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigA(A_red, Eigen::EigenvaluesOnly);
  const double top = eigA.eigenvalues().maxCoeff();
  diag.variable_scale = top > 0.0 ? std::sqrt(diag.cost_scale / top) : 1.0;
  const double s = diag.variable_scale;

  const Eigen::MatrixXd A = (s * s / diag.cost_scale) * A_red;
  const Eigen::VectorXd b = (s / diag.cost_scale) * (U.transpose() * qp.b);
  const double c = qp.c / diag.cost_scale;
  double mat_scale = 0.0;
  for (const auto& M : moments.mats) mat_scale = std::max(mat_scale, M.trace());
  if (!(mat_scale > 0.0)) mat_scale = 1.0;
  std::vector<Eigen::MatrixXd> mats(static_cast<std::size_t>(R),
                                    Eigen::MatrixXd::Zero(p, p));
  for (Eigen::Index i = 0; i < N; ++i) {
    const Eigen::MatrixXd Mi = moments.mats[static_cast<std::size_t>(i)] / mat_scale;
    for (Eigen::Index k = 0; k < R; ++k) mats[static_cast<std::size_t>(k)] += U(i, k) * Mi;
  }
  for (auto& M : mats) M = 0.5 * (M + M.transpose());

  const Eigen::MatrixXd P = sdp::psd_factor(A, options.rank_tol);
  diag.epigraph_rank = P.rows();
  sdp::MatrixPencil pencil = sdp::assemble_schur_lmi(P, b, c, mats);
  // alpha = 1 projected on range(M) gives the same Q as alpha = 1; any
  // positive multiple keeps Q positive definite, so it is shrunk until the
  // epigraph at the start is comparable to the cost at zero. Starting far
  // up the epigraph costs hundreds of damped Newton steps.
  Eigen::VectorXd gamma0 = U.transpose() * Eigen::VectorXd::Ones(N);
  const double reach = std::max({1.0, (P * gamma0).norm(), std::abs(b.dot(gamma0))});
  gamma0 /= reach;
  diag.start_scale = s / reach;
  const auto start = sdp::schur_feasible_start(pencil, P, b, c, mats, gamma0);
  diag.ridge_added = start.ridge_added;

  sdp::Options sopts;
  sopts.tol = options.tol;
  sopts.max_iter = options.max_iter;
  std::vector<nlohmann::json> iterates;
  if (options.debug_sdp) {
    sopts.observer = [&iterates](const sdp::Iterate& it) {
      iterates.push_back({{"outer", it.outer},
                          {"newton", it.newton},
                          {"mu", it.mu},
                          {"x", std::vector<double>(it.x->data(),
                                                    it.x->data() + it.x->size())}});
    };
  }
  const sdp::Solution sol = sdp::solve(pencil, start.x, sopts);
  if (options.debug_sdp) dump_sdp(*options.debug_sdp, pencil, iterates, sol);

  diag.status = sol.status;
  diag.newton_steps = sol.newton_steps;
  diag.outer_iterations = sol.outer_iterations;
  diag.gap = sol.gap;
  if (sol.status != sdp::Status::optimal) {
    std::ostringstream msg;
    msg << "diffusion SDP ended with status " << sdp::to_string(sol.status)
        << " after " << sol.newton_steps << " Newton steps (gap " << sol.gap
        << ", N=" << N << ", p=" << p << ")";
    throw Error(ErrorKind::solver, msg.str());
  }

  Eigen::VectorXd alpha = s * (U * sol.x.tail(R));
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < N; ++i) {
    Q += alpha(i) * moments.mats[static_cast<std::size_t>(i)];
  }
  diag.objective = qp(alpha);
  diag.min_eig_before_clamp = sdp::min_eig(Q);
  diag.clamp_magnitude = std::max(0.0, -diag.min_eig_before_clamp);
  return DiffusionModel(spec, std::move(Q), lambda, std::move(alpha), diag);
}

DiffusionModel fit_diffusion(const SnapshotEnsemble& ensemble,
                             const FeatureMap& spec, const DriftFunction& drift,
                             double lambda,
                             const DiffusionFitOptions& options) {
  const auto targets = residual_targets(ensemble, drift);
  const auto moments = moment_matrices(ensemble, spec);
  return fit_diffusion(moments, targets, spec, lambda, options);
}

std::vector<Eigen::VectorXd> sos_decomposition(const Eigen::MatrixXd& Q) {
  if (Q.rows() != Q.cols()) {
    throw Error(ErrorKind::validation, "SOS decomposition needs a square matrix");
  }
  std::vector<Eigen::VectorXd> out;
  if (Q.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (Q + Q.transpose()));
  const Eigen::VectorXd& values = eig.eigenvalues();
  const double top = values.maxCoeff();
  constexpr double tol = 1e-10;
  if (values.minCoeff() < -tol * std::max(top, 0.0) ||
      (top <= 0.0 && values.minCoeff() < 0.0)) {
    throw Error(ErrorKind::numerical,
                "Q is indefinite: min eigenvalue " +
                    std::to_string(values.minCoeff()));
  }
  for (Eigen::Index i = values.size() - 1; i >= 0; --i) {
    if (values(i) > tol * top) {
      out.push_back(std::sqrt(values(i)) * eig.eigenvectors().col(i));
    }
  }
  return out;
}

}  // namespace sokid
