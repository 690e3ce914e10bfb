#pragma once

// Independent oracles. Everything here is written from the defining formulas
// with explicit loops and does not call the library's numerical kernels.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "sokid/dataset.hpp"

namespace oracle {

inline double gauss(double x, double y, double h) {
  return std::exp(-(x - y) * (x - y) / (2.0 * h * h));
}

inline std::vector<double> monomials(double x, int p) {
  std::vector<double> v(static_cast<std::size_t>(p));
  for (int m = 0; m < p; ++m) v[static_cast<std::size_t>(m)] = std::pow(x, m);
  return v;
}

// Snapshot of trajectory j of group g at time index a.
inline double y(const sokid::SnapshotEnsemble& e, std::size_t g, std::size_t j,
                std::size_t a) {
  return e.group(g).snapshots(static_cast<Eigen::Index>(j),
                              static_cast<Eigen::Index>(a));
}

inline std::size_t k_of(const sokid::SnapshotEnsemble& e, std::size_t g) {
  return e.group(g).trajectories();
}

// Empirical E[K(x_s, x_t)] for s = time index a of group u, t = b of group v.
inline double expected_k(const sokid::SnapshotEnsemble& e, double h,
                         std::size_t u, std::size_t a, std::size_t v,
                         std::size_t b, bool exclude_diagonal) {
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t j1 = 0; j1 < k_of(e, u); ++j1) {
    for (std::size_t j2 = 0; j2 < k_of(e, v); ++j2) {
      if (exclude_diagonal && u == v && j1 == j2) continue;
      sum += gauss(y(e, u, j1, a), y(e, v, j2, b), h);
      count += 1.0;
    }
  }
  return sum / count;
}

// Row order group-major, interval-minor, intervals 1..n.
inline Eigen::MatrixXd occupation_gram(const sokid::SnapshotEnsemble& e,
                                       double h, bool exclude_diagonal = true) {
  const std::size_t n = e.intervals();
  const std::size_t G = e.group_count();
  const auto& t = e.grid().times();
  Eigen::MatrixXd L(static_cast<Eigen::Index>(G * n),
                    static_cast<Eigen::Index>(G * n));
  for (std::size_t u = 0; u < G; ++u) {
    for (std::size_t a = 1; a <= n; ++a) {
      for (std::size_t v = 0; v < G; ++v) {
        for (std::size_t b = 1; b <= n; ++b) {
          double corners = 0.0;
          for (std::size_t s : {a - 1, a}) {
            for (std::size_t r : {b - 1, b}) {
              corners += expected_k(e, h, u, s, v, r, exclude_diagonal);
            }
          }
          const double w = (t[a] - t[a - 1]) * (t[b] - t[b - 1]) / 4.0;
          L(static_cast<Eigen::Index>(u * n + a - 1),
            static_cast<Eigen::Index>(v * n + b - 1)) = w * corners;
        }
      }
    }
  }
  return 0.5 * (L + L.transpose());
}

inline double representer(const sokid::SnapshotEnsemble& e, double h,
                          std::size_t row, double x) {
  const std::size_t n = e.intervals();
  const std::size_t g = row / n;
  const std::size_t a = row % n + 1;
  const auto& t = e.grid().times();
  double left = 0.0;
  double right = 0.0;
  for (std::size_t j = 0; j < k_of(e, g); ++j) {
    left += gauss(x, y(e, g, j, a - 1), h);
    right += gauss(x, y(e, g, j, a), h);
  }
  const double k = static_cast<double>(k_of(e, g));
  return (t[a] - t[a - 1]) / 2.0 * (left / k + right / k);
}

inline std::vector<Eigen::MatrixXd> moment_matrices(
    const sokid::SnapshotEnsemble& e, int p) {
  const std::size_t n = e.intervals();
  const auto& t = e.grid().times();
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t g = 0; g < e.group_count(); ++g) {
    for (std::size_t a = 1; a <= n; ++a) {
      Eigen::MatrixXd M = Eigen::MatrixXd::Zero(p, p);
      for (std::size_t s : {a - 1, a}) {
        for (std::size_t j = 0; j < k_of(e, g); ++j) {
          const auto phi = monomials(y(e, g, j, s), p);
          for (int r = 0; r < p; ++r) {
            for (int c = 0; c < p; ++c) {
              M(r, c) += phi[static_cast<std::size_t>(r)] *
                         phi[static_cast<std::size_t>(c)] /
                         static_cast<double>(k_of(e, g));
            }
          }
        }
      }
      out.push_back((t[a] - t[a - 1]) / 2.0 * M);
    }
  }
  return out;
}

inline Eigen::MatrixXd frobenius_gram(const std::vector<Eigen::MatrixXd>& mats) {
  const auto N = static_cast<Eigen::Index>(mats.size());
  Eigen::MatrixXd G(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < N; ++j) {
      double s = 0.0;
      const auto& A = mats[static_cast<std::size_t>(i)];
      const auto& B = mats[static_cast<std::size_t>(j)];
      for (Eigen::Index r = 0; r < A.rows(); ++r) {
        for (Eigen::Index c = 0; c < A.cols(); ++c) s += A(r, c) * B(r, c);
      }
      G(i, j) = s;
    }
  }
  return G;
}

inline Eigen::VectorXd mean_increments(const sokid::SnapshotEnsemble& e) {
  const std::size_t n = e.intervals();
  Eigen::VectorXd d(static_cast<Eigen::Index>(e.group_count() * n));
  for (std::size_t g = 0; g < e.group_count(); ++g) {
    for (std::size_t a = 1; a <= n; ++a) {
      double s = 0.0;
      for (std::size_t j = 0; j < k_of(e, g); ++j) {
        s += y(e, g, j, a) - y(e, g, j, a - 1);
      }
      d(static_cast<Eigen::Index>(g * n + a - 1)) =
          s / static_cast<double>(k_of(e, g));
    }
  }
  return d;
}

inline Eigen::VectorXd residual_targets(const sokid::SnapshotEnsemble& e,
                                        const std::function<double(double)>& f) {
  const std::size_t n = e.intervals();
  const auto& t = e.grid().times();
  Eigen::VectorXd z(static_cast<Eigen::Index>(e.group_count() * n));
  for (std::size_t g = 0; g < e.group_count(); ++g) {
    for (std::size_t a = 1; a <= n; ++a) {
      double s = 0.0;
      for (std::size_t j = 0; j < k_of(e, g); ++j) {
        const double y0 = y(e, g, j, a - 1);
        const double y1 = y(e, g, j, a);
        const double r = y1 - y0 - (t[a] - t[a - 1]) / 2.0 * (f(y0) + f(y1));
        s += r * r;
      }
      z(static_cast<Eigen::Index>(g * n + a - 1)) =
          s / static_cast<double>(k_of(e, g));
    }
  }
  return z;
}

// Sum of squares form of the diffusion cost for Q = sum_j alpha_j M_j.
inline double diffusion_cost(const std::vector<Eigen::MatrixXd>& mats,
                             const Eigen::VectorXd& z,
                             const Eigen::VectorXd& alpha, double lambda) {
  const auto p = mats.front().rows();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t j = 0; j < mats.size(); ++j) {
    Q += alpha(static_cast<Eigen::Index>(j)) * mats[j];
  }
  double cost = 0.0;
  for (std::size_t i = 0; i < mats.size(); ++i) {
    const double r = (mats[i].array() * Q.array()).sum() -
                     z(static_cast<Eigen::Index>(i));
    cost += r * r;
  }
  return cost + static_cast<double>(mats.size()) * lambda *
                    Q.array().square().sum();
}

// Smallest eigenvalue of a small symmetric matrix by cyclic Jacobi rotations.
inline double jacobi_min_eig(Eigen::MatrixXd A) {
  const Eigen::Index n = A.rows();
  const double scale = A.squaredNorm();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    }
    if (off <= 1e-32 * scale) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (A(p, q) == 0.0) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = A(k, p);
          const double akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = A(p, k);
          const double aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  return A.diagonal().minCoeff();
}

// Random valid ensemble; column 0 of each group equals its initial condition.
inline sokid::SnapshotEnsemble random_ensemble(std::mt19937_64& rng,
                                               std::size_t groups,
                                               std::size_t intervals,
                                               std::size_t k) {
  std::uniform_real_distribution<double> step(0.05, 0.5);
  std::uniform_real_distribution<double> state(-1.0, 1.5);
  std::vector<double> times{std::uniform_real_distribution<double>(-1, 1)(rng)};
  for (std::size_t i = 0; i < intervals; ++i) times.push_back(times.back() + step(rng));
  std::vector<sokid::TrajectoryGroup> gs;
  for (std::size_t g = 0; g < groups; ++g) {
    sokid::TrajectoryGroup tg;
    tg.initial_condition = state(rng);
    tg.snapshots.resize(static_cast<Eigen::Index>(k),
                        static_cast<Eigen::Index>(intervals + 1));
    for (Eigen::Index j = 0; j < tg.snapshots.rows(); ++j) {
      tg.snapshots(j, 0) = tg.initial_condition;
      for (Eigen::Index a = 1; a < tg.snapshots.cols(); ++a) {
        tg.snapshots(j, a) = state(rng);
      }
    }
    gs.push_back(std::move(tg));
  }
  return sokid::SnapshotEnsemble(sokid::TimeGrid(times), std::move(gs));
}

// Ensemble of constant trajectories y = c on the given grid.
inline sokid::SnapshotEnsemble constant_ensemble(std::vector<double> times,
                                                 std::vector<double> levels,
                                                 std::size_t k) {
  std::vector<sokid::TrajectoryGroup> gs;
  for (double c : levels) {
    sokid::TrajectoryGroup tg;
    tg.initial_condition = c;
    tg.snapshots = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(k),
                                             static_cast<Eigen::Index>(times.size()), c);
    gs.push_back(std::move(tg));
  }
  return sokid::SnapshotEnsemble(sokid::TimeGrid(std::move(times)), std::move(gs));
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  return scale == 0.0 ? 0.0 : (a - b).cwiseAbs().maxCoeff() / scale;
}

// N J(alpha) = alpha^T A alpha + b^T alpha + c, written out from the Gram.
struct Quadratic {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  double c = 0.0;
};

inline Quadratic diffusion_qp(const std::vector<Eigen::MatrixXd>& mats,
                              const Eigen::VectorXd& z, double lambda) {
  const Eigen::MatrixXd G = frobenius_gram(mats);
  const auto N = static_cast<double>(mats.size());
  return {G * G + N * lambda * G, -2.0 * G * z, z.squaredNorm()};
}

// Brute-force minimum of N J over alpha in [lo, hi]^N (N <= 2) on a grid of
// the given step, keeping only points where sum alpha_i M_i is PSD (p <= 2,
// checked by trace and determinant).
struct GridResult {
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd alpha;
};

inline bool psd2(const Eigen::MatrixXd& Q) {
  if (Q.rows() == 1) return Q(0, 0) >= 0.0;
  const double tr = Q(0, 0) + Q(1, 1);
  const double det = Q(0, 0) * Q(1, 1) - Q(0, 1) * Q(1, 0);
  return tr >= 0.0 && det >= 0.0 && Q(0, 0) >= 0.0 && Q(1, 1) >= 0.0;
}

inline GridResult grid_search(const std::vector<Eigen::MatrixXd>& mats,
                              const Eigen::VectorXd& z, double lambda,
                              double lo, double hi, double step) {
  const Quadratic q = diffusion_qp(mats, z, lambda);
  const auto N = static_cast<Eigen::Index>(mats.size());
  const auto count = static_cast<long>(std::llround((hi - lo) / step)) + 1;
  GridResult best;
  Eigen::VectorXd a(N);
  auto visit = [&] {
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(mats.front().rows(), mats.front().cols());
    for (Eigen::Index i = 0; i < N; ++i) Q += a(i) * mats[static_cast<std::size_t>(i)];
    if (!psd2(Q)) return;
    const double v = a.dot(q.A * a) + q.b.dot(a) + q.c;
    if (v < best.value) {
      best.value = v;
      best.alpha = a;
    }
  };
  for (long i = 0; i < count; ++i) {
    a(0) = lo + step * static_cast<double>(i);
    if (N == 1) {
      visit();
      continue;
    }
    for (long j = 0; j < count; ++j) {
      a(1) = lo + step * static_cast<double>(j);
      visit();
    }
  }
  return best;
}

// Random PSD p x p matrix with entries of order `scale`.
inline Eigen::MatrixXd random_psd(std::mt19937_64& rng, int p, double scale) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd B(p, p);
  for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = g(rng);
  return scale * (B * B.transpose()) / static_cast<double>(p);
}

}  // namespace oracle
