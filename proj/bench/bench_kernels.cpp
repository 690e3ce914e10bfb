// Serial reference vs. OpenMP kernels on the default experiment size.

#include <chrono>
#include <cstdio>
#include <functional>

#include <omp.h>

#include "sokid/diffusion.hpp"
#include "sokid/drift.hpp"
#include "sokid/serial_reference.hpp"
#include "sokid/simulator.hpp"

namespace {

double time_ms(const std::function<void()>& body, int repeats) {
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < repeats; ++r) body();
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - start)
             .count() /
         repeats;
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-22s %10.2f ms %10.2f ms %8.2fx\n", name, serial, parallel,
              serial / parallel);
}

}  // namespace

int main() {
  using namespace sokid;
  SimPlan plan;
  plan.grid = TimeGrid::equispaced(0.0, 1.0, 100);
  plan.initial_conditions = draw_initial_conditions(10, 0.1, 0.9, 1);
  plan.trajectories_per_ic = 10;
  plan.substeps = 10;
  plan.seed = 1;
  const SdeSpec sde = builtin_sde("paper_quadratic");
  const SnapshotEnsemble ensemble = simulate_ensemble(sde, plan);
  const GaussianKernel kern(1.0);
  const FeatureMap phi(2);

  std::printf("threads: %d, N = %zu functionals\n", omp_get_max_threads(),
              ensemble.functional_count());
  std::printf("%-22s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  row("simulate_ensemble",
      time_ms([&] { (void)serial::simulate_ensemble(sde, plan); }, 5),
      time_ms([&] { (void)simulate_ensemble(sde, plan); }, 5));
  row("occupation_gram",
      time_ms([&] { (void)serial::occupation_gram(ensemble, kern); }, 1),
      time_ms([&] { (void)occupation_gram(ensemble, kern); }, 1));
  row("moment_matrices",
      time_ms([&] { (void)serial::moment_matrices(ensemble, phi); }, 3),
      time_ms([&] { (void)moment_matrices(ensemble, phi); }, 3));
  const auto drift = sde.drift;
  row("residual_targets",
      time_ms([&] { (void)serial::residual_targets(ensemble, drift); }, 20),
      time_ms([&] { (void)residual_targets(ensemble, drift); }, 20));
  return 0;
}
