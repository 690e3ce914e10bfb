#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sokid/dataset.hpp"

namespace sokid {

using ScalarFunction = std::function<double(double)>;

/// dx = drift(x) dt + diffusion(x) dW. Both callables must be pure.
struct SdeSpec {
  std::string name;
  ScalarFunction drift;
  ScalarFunction diffusion;
};

using SdeParameters = std::map<std::string, double>;

/// Named SDEs:
///   paper_quadratic  f = x^2 - x,     sigma = x / 10
///   ou               f = -theta x,    sigma = sigma        (theta 1, sigma 0.3)
///   gbm              f = mu x,        sigma = s x          (mu 1, s 0.1)
///   constant_sigma   f = 0,           sigma = s            (s 0.5)
/// Unknown names or parameters throw Error(config).
SdeSpec builtin_sde(std::string_view name, const SdeParameters& params = {});
std::vector<std::string> builtin_sde_names();

struct SimPlan {
  TimeGrid grid;
  std::vector<double> initial_conditions;
  std::size_t trajectories_per_ic = 10;
  std::size_t substeps = 10;
  std::uint64_t seed = 1;
};

/// Throws Error(config) for an unusable plan.
void validate(const SimPlan& plan);

/// Independent random stream seed for one (group, trajectory) pair.
std::uint64_t stream_seed(std::uint64_t root, std::size_t group,
                          std::size_t trajectory);

/// Euler-Maruyama with `substeps` equal steps inside every snapshot interval.
/// Trajectories run in parallel; the result does not depend on thread count.
/// A non-finite state throws Error(numerical) naming trajectory and time.
SnapshotEnsemble simulate_ensemble(const SdeSpec& sde, const SimPlan& plan);

/// `count` i.i.d. uniform draws on [low, high].
std::vector<double> draw_initial_conditions(std::size_t count, double low,
                                            double high, std::uint64_t seed);

}  // namespace sokid
