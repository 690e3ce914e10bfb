#pragma once

// Single-threaded reference versions of the parallel kernels. They follow the
// defining formulas entry by entry, without the node caching used by the
// parallel code, and exist for cross-checking and benchmarking.

#include "sokid/dataset.hpp"
#include "sokid/diffusion.hpp"
#include "sokid/drift.hpp"
#include "sokid/kernels.hpp"
#include "sokid/simulator.hpp"

namespace sokid::serial {

Eigen::MatrixXd occupation_gram(
    const SnapshotEnsemble& ensemble, const GaussianKernel& kern,
    PairingMode pairing = PairingMode::independent_copies);

MomentMatrices moment_matrices(const SnapshotEnsemble& ensemble,
                               const FeatureMap& spec);

ResidualTargets residual_targets(const SnapshotEnsemble& ensemble,
                                 const DriftFunction& drift);

SnapshotEnsemble simulate_ensemble(const SdeSpec& sde, const SimPlan& plan);

}  // namespace sokid::serial
