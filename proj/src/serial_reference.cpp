#include "sokid/serial_reference.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sokid/error.hpp"

namespace sokid::serial {

namespace {

double corner(const SnapshotEnsemble& ensemble, const GaussianKernel& kern,
              std::size_t u, Eigen::Index a, std::size_t v, Eigen::Index b,
              PairingMode pairing) {
  const auto& yu = ensemble.group(u).snapshots;
  const auto& yv = ensemble.group(v).snapshots;
  const bool skip = u == v && pairing == PairingMode::independent_copies;
  double sum = 0.0;
  double count = 0.0;
  for (Eigen::Index j1 = 0; j1 < yu.rows(); ++j1) {
    for (Eigen::Index j2 = 0; j2 < yv.rows(); ++j2) {
      if (skip && j1 == j2) continue;
      sum += kern(yu(j1, a), yv(j2, b));
      count += 1.0;
    }
  }
  return sum / count;
}

}  // namespace

Eigen::MatrixXd occupation_gram(const SnapshotEnsemble& ensemble,
                                const GaussianKernel& kern,
                                PairingMode pairing) {
  validate(ensemble);
  if (pairing == PairingMode::independent_copies) {
    for (const auto& group : ensemble.groups()) {
      if (group.trajectories() < 2) {
        throw Error(ErrorKind::validation,
                    "independent-copy estimator needs k >= 2");
      }
    }
  }
  const auto N = static_cast<Eigen::Index>(ensemble.functional_count());
  Eigen::MatrixXd M(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const auto fi = ensemble.functional(static_cast<std::size_t>(i));
    const auto a = static_cast<Eigen::Index>(fi.interval);
    for (Eigen::Index j = 0; j < N; ++j) {
      const auto fj = ensemble.functional(static_cast<std::size_t>(j));
      const auto b = static_cast<Eigen::Index>(fj.interval);
      const double sum =
          corner(ensemble, kern, fi.group, a - 1, fj.group, b - 1, pairing) +
          corner(ensemble, kern, fi.group, a - 1, fj.group, b, pairing) +
          corner(ensemble, kern, fi.group, a, fj.group, b - 1, pairing) +
          corner(ensemble, kern, fi.group, a, fj.group, b, pairing);
      M(i, j) = 0.25 * ensemble.grid().width(fi.interval) *
                ensemble.grid().width(fj.interval) * sum;
    }
  }
  return 0.5 * (M + M.transpose());
}

MomentMatrices moment_matrices(const SnapshotEnsemble& ensemble,
                               const FeatureMap& spec) {
  validate(ensemble);
  const int p = spec.dimension();
  MomentMatrices out;
  for (std::size_t row = 0; row < ensemble.functional_count(); ++row) {
    const auto f = ensemble.functional(row);
    const auto& y = ensemble.group(f.group).snapshots;
    const auto i = static_cast<Eigen::Index>(f.interval);
    Eigen::MatrixXd left = Eigen::MatrixXd::Zero(p, p);
    Eigen::MatrixXd right = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      const Eigen::VectorXd a = spec(y(j, i - 1));
      const Eigen::VectorXd b = spec(y(j, i));
      left += a * a.transpose();
      right += b * b.transpose();
    }
    const double k = static_cast<double>(y.rows());
    out.mats.push_back(0.5 * ensemble.grid().width(f.interval) *
                       (left / k + right / k));
  }
  const auto N = static_cast<Eigen::Index>(out.mats.size());
  out.gram.resize(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j < N; ++j) {
      out.gram(i, j) = (out.mats[static_cast<std::size_t>(i)] *
                        out.mats[static_cast<std::size_t>(j)])
                           .trace();
    }
  }
  return out;
}

ResidualTargets residual_targets(const SnapshotEnsemble& ensemble,
                                 const DriftFunction& drift) {
  validate(ensemble);
  ResidualTargets out;
  out.index = ensemble.functional_index();
  out.z.resize(static_cast<Eigen::Index>(ensemble.functional_count()));
  for (std::size_t row = 0; row < ensemble.functional_count(); ++row) {
    const auto f = ensemble.functional(row);
    const auto& y = ensemble.group(f.group).snapshots;
    const auto i = static_cast<Eigen::Index>(f.interval);
    const double dt = ensemble.grid().width(f.interval);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      const double integral = 0.5 * dt * (drift(y(j, i - 1)) + drift(y(j, i)));
      const double r = y(j, i) - y(j, i - 1) - integral;
      sum += r * r;
    }
    out.z(static_cast<Eigen::Index>(row)) = sum / static_cast<double>(y.rows());
  }
  return out;
}

SnapshotEnsemble simulate_ensemble(const SdeSpec& sde, const SimPlan& plan) {
  validate(plan);
  const auto& times = plan.grid.times();
  std::vector<TrajectoryGroup> groups;
  for (std::size_t g = 0; g < plan.initial_conditions.size(); ++g) {
    TrajectoryGroup group;
    group.initial_condition = plan.initial_conditions[g];
    group.snapshots.resize(static_cast<Eigen::Index>(plan.trajectories_per_ic),
                           static_cast<Eigen::Index>(times.size()));
    for (std::size_t j = 0; j < plan.trajectories_per_ic; ++j) {
      std::mt19937_64 rng(stream_seed(plan.seed, g, j));
      std::normal_distribution<double> normal(0.0, 1.0);
      double x = group.initial_condition;
      const auto jj = static_cast<Eigen::Index>(j);
      group.snapshots(jj, 0) = x;
      for (std::size_t i = 1; i < times.size(); ++i) {
        const double delta =
            (times[i] - times[i - 1]) / static_cast<double>(plan.substeps);
        for (std::size_t s = 0; s < plan.substeps; ++s) {
          const double xi = normal(rng);
          x = x + sde.drift(x) * delta + sde.diffusion(x) * std::sqrt(delta) * xi;
        }
        if (!std::isfinite(x)) {
          throw Error(ErrorKind::numerical,
                      "non-finite state in group " + std::to_string(g) +
                          ", trajectory " + std::to_string(j));
        }
        group.snapshots(jj, static_cast<Eigen::Index>(i)) = x;
      }
    }
    groups.push_back(std::move(group));
  }
  return SnapshotEnsemble(plan.grid, std::move(groups));
}

}  // namespace sokid::serial
