#include "sokid/simulator.hpp"

#include <cmath>
#include <optional>
#include <random>
#include <sstream>

#include "sokid/error.hpp"

namespace sokid {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double param(const SdeParameters& params, const char* key, double fallback) {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

void check_params(std::string_view name, const SdeParameters& params,
                  std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : params) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) {
      throw Error(ErrorKind::config, "SDE '" + std::string(name) +
                                         "' has no parameter '" + key + "'");
    }
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::config,
                  "SDE parameter '" + key + "' must be finite");
    }
  }
}

// Fills row `traj` of `out`; returns an error message on blow-up.
std::optional<std::string> integrate(const SdeSpec& sde, const SimPlan& plan,
                                     double x0, std::uint64_t seed,
                                     Eigen::RowVectorXd& out,
                                     std::size_t group, std::size_t traj) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& times = plan.grid.times();
  const double steps = static_cast<double>(plan.substeps);
  double x = x0;
  out(0) = x;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double delta = (times[i] - times[i - 1]) / steps;
    const double sqrt_delta = std::sqrt(delta);
    for (std::size_t s = 0; s < plan.substeps; ++s) {
      const double xi = normal(rng);
      x = x + sde.drift(x) * delta + sde.diffusion(x) * sqrt_delta * xi;
      if (!std::isfinite(x)) {
        std::ostringstream msg;
        msg << "non-finite state in group " << group << ", trajectory " << traj
            << " before t=" << times[i] << " (interval " << i << ")";
        return msg.str();
      }
    }
    out(static_cast<Eigen::Index>(i)) = x;
  }
  return std::nullopt;
}

}  // namespace

SdeSpec builtin_sde(std::string_view name, const SdeParameters& params) {
  if (name == "paper_quadratic") {
    check_params(name, params, {});
    return {"paper_quadratic", [](double x) { return x * x - x; },
            [](double x) { return x / 10.0; }};
  }
  if (name == "ou") {
    check_params(name, params, {"theta", "sigma"});
    const double theta = param(params, "theta", 1.0);
    const double sigma = param(params, "sigma", 0.3);
    return {"ou", [theta](double x) { return -theta * x; },
            [sigma](double) { return sigma; }};
  }
  if (name == "gbm") {
    check_params(name, params, {"mu", "s"});
    const double mu = param(params, "mu", 1.0);
    const double s = param(params, "s", 0.1);
    return {"gbm", [mu](double x) { return mu * x; },
            [s](double x) { return s * x; }};
  }
  if (name == "constant_sigma") {
    check_params(name, params, {"s"});
    const double s = param(params, "s", 0.5);
    return {"constant_sigma", [](double) { return 0.0; },
            [s](double) { return s; }};
  }
  throw Error(ErrorKind::config, "unknown SDE '" + std::string(name) + "'");
}

std::vector<std::string> builtin_sde_names() {
  return {"paper_quadratic", "ou", "gbm", "constant_sigma"};
}

void validate(const SimPlan& plan) {
  if (plan.grid.points() < 2) {
    throw Error(ErrorKind::config, "simulation grid needs at least 2 points");
  }
  if (plan.initial_conditions.empty()) {
    throw Error(ErrorKind::config, "simulation needs at least one initial condition");
  }
  for (double x0 : plan.initial_conditions) {
    if (!std::isfinite(x0)) {
      throw Error(ErrorKind::config, "initial conditions must be finite");
    }
  }
  if (plan.trajectories_per_ic < 1) {
    throw Error(ErrorKind::config, "trajectories_per_ic must be >= 1");
  }
  if (plan.substeps < 1) {
    throw Error(ErrorKind::config, "substeps must be >= 1");
  }
}

std::uint64_t stream_seed(std::uint64_t root, std::size_t group,
                          std::size_t trajectory) {
  std::uint64_t s = splitmix64(root);
  s = splitmix64(s ^ (static_cast<std::uint64_t>(group) * 0xd1342543de82ef95ULL));
  s = splitmix64(s ^ (static_cast<std::uint64_t>(trajectory) + 0x632be59bd9b4e019ULL));
  return s;
}

SnapshotEnsemble simulate_ensemble(const SdeSpec& sde, const SimPlan& plan) {
  validate(plan);
  const std::size_t g_count = plan.initial_conditions.size();
  const std::size_t k = plan.trajectories_per_ic;
  const auto cols = static_cast<Eigen::Index>(plan.grid.points());

  std::vector<TrajectoryGroup> groups(g_count);
  for (std::size_t g = 0; g < g_count; ++g) {
    groups[g].initial_condition = plan.initial_conditions[g];
    groups[g].snapshots.resize(static_cast<Eigen::Index>(k), cols);
  }

  const auto total = static_cast<std::int64_t>(g_count * k);
  std::vector<std::optional<std::string>> errors(static_cast<std::size_t>(total));

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t idx = 0; idx < total; ++idx) {
    const auto g = static_cast<std::size_t>(idx) / k;
    const auto j = static_cast<std::size_t>(idx) % k;
    Eigen::RowVectorXd path(cols);
    errors[static_cast<std::size_t>(idx)] =
        integrate(sde, plan, plan.initial_conditions[g],
                  stream_seed(plan.seed, g, j), path, g, j);
    groups[g].snapshots.row(static_cast<Eigen::Index>(j)) = path;
  }

  for (const auto& err : errors) {
    if (err) throw Error(ErrorKind::numerical, *err);
  }
  return SnapshotEnsemble(plan.grid, std::move(groups));
}

std::vector<double> draw_initial_conditions(std::size_t count, double low,
                                            double high, std::uint64_t seed) {
  if (!(low < high)) {
    throw Error(ErrorKind::config, "initial-condition range needs low < high");
  }
  std::mt19937_64 rng(splitmix64(seed ^ 0x5bd1e9955bd1e995ULL));
  std::uniform_real_distribution<double> uniform(low, high);
  std::vector<double> out(count);
  for (auto& v : out) v = uniform(rng);
  return out;
}

}  // namespace sokid
