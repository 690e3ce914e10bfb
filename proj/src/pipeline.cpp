#include "sokid/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "sokid/error.hpp"
#include "sokid/io.hpp"
#include "sokid/serialization.hpp"

namespace sokid {

using nlohmann::json;

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& target) {
  if (j.contains(key) && !j.at(key).is_null()) target = j.at(key).get<T>();
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - since)
      .count();
}

std::string format_real(double v) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

}  // namespace

RunConfig config_from_json(const json& j) {
  RunConfig c;
  try {
    if (j.contains("sde")) {
      const auto& s = j.at("sde");
      if (s.is_null()) {
        c.sde_name.reset();
      } else if (s.is_string()) {
        c.sde_name = s.get<std::string>();
      } else {
        c.sde_name = s.at("name").get<std::string>();
        read_if(s, "params", c.sde_params);
      }
    }
    if (j.contains("simulation")) {
      const auto& s = j.at("simulation");
      read_if(s, "times", c.times);
      read_if(s, "t0", c.t0);
      read_if(s, "t1", c.t1);
      read_if(s, "points", c.points);
      if (s.contains("initial_conditions")) {
        const auto& ic = s.at("initial_conditions");
        if (ic.is_array()) {
          c.initial_conditions = ic.get<std::vector<double>>();
        } else {
          read_if(ic, "count", c.ic_count);
          read_if(ic, "low", c.ic_low);
          read_if(ic, "high", c.ic_high);
        }
      }
      read_if(s, "trajectories_per_ic", c.trajectories_per_ic);
      read_if(s, "substeps", c.substeps);
      read_if(s, "seed", c.seed);
    }
    if (j.contains("drift")) {
      const auto& d = j.at("drift");
      if (d.contains("kernel")) c.drift_kernel = gaussian_from_json(d.at("kernel"));
      read_if(d, "lambda", c.lambda_drift);
      if (d.contains("pairing")) {
        c.pairing = parse_pairing(d.at("pairing").get<std::string>());
      }
    }
    if (j.contains("diffusion")) {
      const auto& d = j.at("diffusion");
      if (d.contains("features")) c.features = features_from_json(d.at("features"));
      read_if(d, "lambda", c.lambda_diff);
      read_if(d, "sdp_tol", c.sdp_tol);
      read_if(d, "sdp_max_iter", c.sdp_max_iter);
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      read_if(e, "low", c.eval_low);
      read_if(e, "high", c.eval_high);
      read_if(e, "count", c.eval_count);
    }
    if (j.contains("output_dir")) {
      c.output_dir = j.at("output_dir").get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("bad config value: ") + e.what());
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  return config_from_json(parse_json(read_text(path), path.string()));
}

json config_to_json(const RunConfig& c) {
  json j;
  if (c.sde_name) {
    j["sde"] = {{"name", *c.sde_name}, {"params", c.sde_params}};
  } else {
    j["sde"] = nullptr;
  }
  json sim = {{"trajectories_per_ic", c.trajectories_per_ic},
              {"substeps", c.substeps},
              {"seed", c.seed}};
  if (c.times.empty()) {
    sim["t0"] = c.t0;
    sim["t1"] = c.t1;
    sim["points"] = c.points;
  } else {
    sim["times"] = c.times;
  }
  if (c.initial_conditions.empty()) {
    sim["initial_conditions"] = {
        {"count", c.ic_count}, {"low", c.ic_low}, {"high", c.ic_high}};
  } else {
    sim["initial_conditions"] = c.initial_conditions;
  }
  j["simulation"] = std::move(sim);
  j["drift"] = {{"kernel", kernel_to_json(c.drift_kernel)},
                {"lambda", c.lambda_drift},
                {"pairing", to_string(c.pairing)}};
  j["diffusion"] = {{"features", kernel_to_json(c.features)},
                    {"lambda", c.lambda_diff},
                    {"sdp_tol", c.sdp_tol},
                    {"sdp_max_iter", c.sdp_max_iter}};
  j["evaluation"] = {
      {"low", c.eval_low}, {"high", c.eval_high}, {"count", c.eval_count}};
  j["output_dir"] = c.output_dir.string();
  return j;
}

void validate(const RunConfig& c) {
  auto bad = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
  if (c.sde_name) {
    const auto names = builtin_sde_names();
    if (std::find(names.begin(), names.end(), *c.sde_name) == names.end()) {
      bad("unknown SDE '" + *c.sde_name + "'");
    }
    builtin_sde(*c.sde_name, c.sde_params);  // checks parameter names
  }
  if (c.substeps < 1) bad("substeps must be >= 1, got " + std::to_string(c.substeps));
  if (c.trajectories_per_ic < 1) bad("trajectories_per_ic must be >= 1");
  if (c.times.empty() && c.points < 2) bad("simulation needs at least 2 points");
  if (c.times.empty() && !(c.t0 < c.t1)) bad("simulation needs t0 < t1");
  if (c.initial_conditions.empty()) {
    if (c.ic_count < 1) bad("initial condition count must be >= 1");
    if (!(c.ic_low < c.ic_high)) bad("initial condition range needs low < high");
  }
  if (!(c.lambda_drift >= 0.0)) bad("drift lambda must be >= 0");
  if (!(c.lambda_diff >= 0.0)) bad("diffusion lambda must be >= 0");
  if (!(c.sdp_tol > 0.0)) bad("sdp_tol must be positive");
  if (c.sdp_max_iter < 1) bad("sdp_max_iter must be >= 1");
  if (!(c.eval_low < c.eval_high)) bad("evaluation grid needs low < high");
  if (c.eval_count < 2) bad("evaluation grid needs count >= 2");
}

TimeGrid simulation_grid(const RunConfig& c) {
  try {
    return c.times.empty() ? TimeGrid::equispaced(c.t0, c.t1, c.points)
                           : TimeGrid(c.times);
  } catch (const Error& e) {
    throw Error(ErrorKind::config, e.what());
  }
}

SimPlan simulation_plan(const RunConfig& c) {
  validate(c);
  SimPlan plan;
  plan.grid = simulation_grid(c);
  plan.initial_conditions =
      c.initial_conditions.empty()
          ? draw_initial_conditions(c.ic_count, c.ic_low, c.ic_high, c.seed)
          : c.initial_conditions;
  plan.trajectories_per_ic = c.trajectories_per_ic;
  plan.substeps = static_cast<std::size_t>(c.substeps);
  plan.seed = c.seed;
  return plan;
}

SdeSpec true_sde(const RunConfig& c) {
  if (!c.sde_name) {
    throw Error(ErrorKind::config, "config names no true SDE");
  }
  return builtin_sde(*c.sde_name, c.sde_params);
}

std::vector<double> evaluation_grid(const RunConfig& c) {
  std::vector<double> xs(c.eval_count);
  for (std::size_t i = 0; i < c.eval_count; ++i) {
    xs[i] = c.eval_low + (c.eval_high - c.eval_low) * static_cast<double>(i) /
                             static_cast<double>(c.eval_count - 1);
  }
  xs.back() = c.eval_high;
  return xs;
}

std::pair<double, double> occupied_range(const SnapshotEnsemble& ensemble) {
  std::vector<double> states = ensemble.all_states();
  std::sort(states.begin(), states.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(states.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, states.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return states[lo] + frac * (states[hi] - states[lo]);
  };
  return {quantile(0.05), quantile(0.95)};
}

SimulateResult cmd_simulate(const RunConfig& config,
                            const std::filesystem::path& out,
                            FileFormat format) {
  const SdeSpec sde = true_sde(config);
  const SimPlan plan = simulation_plan(config);
  SnapshotEnsemble ensemble = simulate_ensemble(sde, plan);
  save_ensemble(ensemble, out, format);
  return {std::move(ensemble), file_hash(out)};
}

FitResult cmd_fit(const RunConfig& config, const std::filesystem::path& data,
                  const std::filesystem::path& outdir,
                  const FitOptions& options) {
  validate(config);
  const auto t_start = std::chrono::steady_clock::now();
  const FileFormat format = format_from_path(data);
  EnsembleRef ref{std::filesystem::absolute(data).lexically_normal(), format,
                  file_hash(data)};
  auto ensemble =
      std::make_shared<const SnapshotEnsemble>(load_ensemble(data, format));
  const double load_ms = elapsed_ms(t_start);

  const auto t_drift = std::chrono::steady_clock::now();
  DriftModel drift =
      fit_drift(ensemble, config.drift_kernel, config.lambda_drift, config.pairing);
  const double drift_ms = elapsed_ms(t_drift);

  const auto t_diff = std::chrono::steady_clock::now();
  DiffusionFitOptions dopts;
  dopts.tol = config.sdp_tol;
  dopts.max_iter = config.sdp_max_iter;
  dopts.debug_sdp = options.debug_sdp;
  DiffusionModel diffusion = fit_diffusion(
      *ensemble, config.features, [&drift](double x) { return drift(x); },
      config.lambda_diff, dopts);
  const double diff_ms = elapsed_ms(t_diff);

  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) {
    throw Error(ErrorKind::io, "cannot create output directory '" +
                                   outdir.string() + "': " + ec.message());
  }
  save_drift_model(drift, ref, outdir / drift_model_file);
  save_diffusion_model(diffusion, outdir / diffusion_model_file);

  json report;
  report["dataset"] = {{"path", ref.path.string()},
                       {"sha256", ref.sha256},
                       {"groups", ensemble->group_count()},
                       {"intervals", ensemble->intervals()},
                       {"functionals", ensemble->functional_count()}};
  report["lambda_drift"] = config.lambda_drift;
  report["lambda_diff"] = config.lambda_diff;
  report["drift"] = {{"pairing", to_string(drift.pairing())},
                     {"used_fallback_solver", drift.used_fallback()},
                     {"alpha_norm", drift.alpha().norm()}};
  report["diffusion"] = diffusion_model_to_json(diffusion).at("solver");
  report["timings_ms"] = {{"load", load_ms},
                          {"drift_fit", drift_ms},
                          {"diffusion_fit", diff_ms},
                          {"total", elapsed_ms(t_start)}};
  write_text(outdir / run_report_file, report.dump(1) + "\n");
  return {std::move(drift), std::move(diffusion), std::move(report)};
}

LoadedModels load_models(const std::filesystem::path& model_dir) {
  return {load_drift_model(model_dir / drift_model_file),
          load_diffusion_model(model_dir / diffusion_model_file)};
}

std::string export_curves(const ScalarFunction& f_hat,
                          const ScalarFunction& sigma_hat,
                          const std::optional<SdeSpec>& truth,
                          const std::vector<double>& grid) {
  std::string out = truth ? "x,f_hat,sigma_hat,f_true,sigma_true\n"
                          : "x,f_hat,sigma_hat\n";
  for (double x : grid) {
    out += format_real(x) + "," + format_real(f_hat(x)) + "," +
           format_real(sigma_hat(x));
    if (truth) {
      out += "," + format_real(truth->drift(x)) + "," +
             format_real(std::abs(truth->diffusion(x)));
    }
    out += '\n';
  }
  return out;
}

void cmd_export_curves(const RunConfig& config,
                       const std::filesystem::path& model_dir,
                       const std::filesystem::path& out) {
  const LoadedModels models = load_models(model_dir);
  std::optional<SdeSpec> truth;
  if (config.sde_name) truth = true_sde(config);
  write_text(out, export_curves([&](double x) { return models.drift(x); },
                                [&](double x) { return models.diffusion.sigma(x); },
                                truth, evaluation_grid(config)));
}

Metrics compute_metrics(const ScalarFunction& f_hat,
                        const ScalarFunction& sigma_hat, const SdeSpec& truth,
                        const std::vector<double>& grid, double low,
                        double high) {
  Metrics m;
  m.range_low = low;
  m.range_high = high;
  double f_err = 0.0, f_ref = 0.0, s_err = 0.0, s_ref = 0.0;
  for (double x : grid) {
    if (x < low || x > high) continue;
    ++m.points;
    const double f = truth.drift(x);
    const double s = std::abs(truth.diffusion(x));
    const double df = f_hat(x) - f;
    const double ds = sigma_hat(x) - s;
    f_err += df * df;
    f_ref += f * f;
    s_err += ds * ds;
    s_ref += s * s;
    m.drift_max_abs = std::max(m.drift_max_abs, std::abs(df));
    m.diffusion_max_abs = std::max(m.diffusion_max_abs, std::abs(ds));
  }
  if (m.points == 0) {
    throw Error(ErrorKind::validation,
                "no evaluation points fall inside the occupied range");
  }
  auto relative = [](double err, double ref) {
    if (ref > 0.0) return std::sqrt(err / ref);
    return err > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  m.drift_rel_l2 = relative(f_err, f_ref);
  m.diffusion_rel_l2 = relative(s_err, s_ref);
  return m;
}

json metrics_to_json(const Metrics& m) {
  return {{"drift_rel_l2", m.drift_rel_l2},
          {"diffusion_rel_l2", m.diffusion_rel_l2},
          {"drift_max_abs", m.drift_max_abs},
          {"diffusion_max_abs", m.diffusion_max_abs},
          {"occupied_range", {m.range_low, m.range_high}},
          {"points", m.points}};
}

Metrics cmd_eval(const RunConfig& config, const std::filesystem::path& model_dir,
                 const std::filesystem::path& out) {
  if (!config.sde_name) {
    throw Error(ErrorKind::config, "eval needs a known true SDE in the config");
  }
  const SdeSpec truth = true_sde(config);
  const LoadedModels models = load_models(model_dir);
  const auto [low, high] = occupied_range(models.drift.ensemble());
  const Metrics m = compute_metrics(
      [&](double x) { return models.drift(x); },
      [&](double x) { return models.diffusion.sigma(x); }, truth,
      evaluation_grid(config), low, high);
  json doc = metrics_to_json(m);
  doc["sde"] = truth.name;
  write_text(out, doc.dump(1) + "\n");
  return m;
}

}  // namespace sokid
