#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sokid/dataset.hpp"
#include "sokid/diffusion.hpp"
#include "sokid/drift.hpp"
#include "sokid/kernels.hpp"
#include "sokid/simulator.hpp"

namespace sokid {

/// Everything a reproducible run needs. Defaults reproduce the quadratic
/// experiment: 10 uniform initial conditions on [0.1, 0.9], 10 trajectories
/// each, 100 equispaced snapshots on [0, 1], Gaussian bandwidth 1,
/// phi = (1, x), lambda 1e-6, evaluation on [0, 1.2] at 121 points.
struct RunConfig {
  // The true SDE. Absent when fitting data of unknown origin.
  std::optional<std::string> sde_name = "paper_quadratic";
  SdeParameters sde_params;

  std::vector<double> times;  // explicit grid; empty means t0/t1/points
  double t0 = 0.0;
  double t1 = 1.0;
  std::size_t points = 100;
  std::vector<double> initial_conditions;  // explicit; empty means drawn
  std::size_t ic_count = 10;
  double ic_low = 0.1;
  double ic_high = 0.9;
  std::size_t trajectories_per_ic = 10;
  std::int64_t substeps = 10;
  std::uint64_t seed = 1;

  GaussianKernel drift_kernel{1.0};
  double lambda_drift = 1e-6;
  PairingMode pairing = PairingMode::independent_copies;

  FeatureMap features{2};
  double lambda_diff = 1e-6;
  double sdp_tol = 1e-7;
  int sdp_max_iter = 500;

  double eval_low = 0.0;
  double eval_high = 1.2;
  std::size_t eval_count = 121;

  std::filesystem::path output_dir = "out";
};

/// Fills a config from JSON; missing keys keep their defaults. Throws
/// Error(config) for invalid values and Error(parse) for malformed input.
RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& config);
void validate(const RunConfig& config);

TimeGrid simulation_grid(const RunConfig& config);
SimPlan simulation_plan(const RunConfig& config);
/// The configured true SDE; throws Error(config) if none is set.
SdeSpec true_sde(const RunConfig& config);

std::vector<double> evaluation_grid(const RunConfig& config);

/// 5th and 95th percentiles (linear interpolation) of all observed states.
std::pair<double, double> occupied_range(const SnapshotEnsemble& ensemble);

struct SimulateResult {
  SnapshotEnsemble ensemble;
  std::string sha256;
};

SimulateResult cmd_simulate(const RunConfig& config,
                            const std::filesystem::path& out,
                            FileFormat format);

struct FitOptions {
  std::optional<std::filesystem::path> debug_sdp;
};

struct FitResult {
  DriftModel drift;
  DiffusionModel diffusion;
  nlohmann::json report;
};

inline constexpr const char* drift_model_file = "drift_model.json";
inline constexpr const char* diffusion_model_file = "diffusion_model.json";
inline constexpr const char* run_report_file = "run_report.json";

/// Fits the drift, then the diffusion with the fitted drift plugged in, and
/// writes both model files plus a run report into `outdir`.
FitResult cmd_fit(const RunConfig& config, const std::filesystem::path& data,
                  const std::filesystem::path& outdir,
                  const FitOptions& options = {});

struct LoadedModels {
  DriftModel drift;
  DiffusionModel diffusion;
};

LoadedModels load_models(const std::filesystem::path& model_dir);

/// CSV of x, f_hat, sigma_hat and, with a known SDE, f_true, sigma_true.
std::string export_curves(const ScalarFunction& f_hat,
                          const ScalarFunction& sigma_hat,
                          const std::optional<SdeSpec>& truth,
                          const std::vector<double>& grid);

void cmd_export_curves(const RunConfig& config,
                       const std::filesystem::path& model_dir,
                       const std::filesystem::path& out);

struct Metrics {
  double drift_rel_l2 = 0.0;
  double diffusion_rel_l2 = 0.0;
  double drift_max_abs = 0.0;
  double diffusion_max_abs = 0.0;
  double range_low = 0.0;
  double range_high = 0.0;
  std::size_t points = 0;
};

/// Relative L2 errors over grid points inside [low, high]. The diffusion is
/// compared against |sigma|.
Metrics compute_metrics(const ScalarFunction& f_hat,
                        const ScalarFunction& sigma_hat, const SdeSpec& truth,
                        const std::vector<double>& grid, double low,
                        double high);

nlohmann::json metrics_to_json(const Metrics& m);

Metrics cmd_eval(const RunConfig& config, const std::filesystem::path& model_dir,
                 const std::filesystem::path& out);

}  // namespace sokid
