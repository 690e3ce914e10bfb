// sokid: simulate SDE snapshot ensembles, fit drift and diffusion, export
// fitted curves and error metrics.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sokid/error.hpp"
#include "sokid/pipeline.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda_drift;
  std::optional<double> lambda_diff;
};

sokid::RunConfig resolve(const std::string& path, const Overrides& o) {
  sokid::RunConfig config = sokid::load_config(path);
  if (o.seed) config.seed = *o.seed;
  if (o.lambda_drift) config.lambda_drift = *o.lambda_drift;
  if (o.lambda_diff) config.lambda_diff = *o.lambda_diff;
  sokid::validate(config);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Drift and diffusion identification from SDE snapshot ensembles"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;
  std::string format_name;
  std::string out_path;
  std::string data_path;
  std::string model_dir;
  std::string debug_sdp;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "run config (JSON)")->required();
    cmd->add_option("--seed", overrides.seed, "override the simulation seed");
    cmd->add_option("--lambda-drift", overrides.lambda_drift, "override drift lambda");
    cmd->add_option("--lambda-diff", overrides.lambda_diff, "override diffusion lambda");
  };

  auto* simulate = app.add_subcommand("simulate", "simulate an ensemble");
  add_common(simulate);
  simulate->add_option("-o,--output", out_path, "ensemble file")->required();
  simulate->add_option("--format", format_name, "csv or json (default: from extension)")
      ->check(CLI::IsMember({"csv", "json"}));

  auto* fit = app.add_subcommand("fit", "fit drift and diffusion models");
  add_common(fit);
  fit->add_option("-d,--data", data_path, "ensemble file")->required();
  fit->add_option("-o,--output", out_path, "output directory")->required();
  fit->add_option("--debug-sdp", debug_sdp, "dump the SDP pencil and iterates");

  auto* curves = app.add_subcommand("export-curves", "write fitted curves as CSV");
  add_common(curves);
  curves->add_option("-m,--models", model_dir, "model directory")->required();
  curves->add_option("-o,--output", out_path, "CSV file")->required();

  auto* eval = app.add_subcommand("eval", "error metrics against the true SDE");
  add_common(eval);
  eval->add_option("-m,--models", model_dir, "model directory")->required();
  eval->add_option("-o,--output", out_path, "metrics JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[usage]: " << e.what() << "\n";
    return 2;
  }

  try {
    const sokid::RunConfig config = resolve(config_path, overrides);
    if (simulate->parsed()) {
      const auto format = format_name.empty() ? sokid::format_from_path(out_path)
                                              : sokid::parse_format(format_name);
      const auto result = sokid::cmd_simulate(config, out_path, format);
      std::cout << result.sha256 << "  " << out_path << "\n";
    } else if (fit->parsed()) {
      sokid::FitOptions options;
      if (!debug_sdp.empty()) options.debug_sdp = debug_sdp;
      const auto result = sokid::cmd_fit(config, data_path, out_path, options);
      std::cout << "drift: " << result.drift.alpha().size() << " coefficients, "
                << "diffusion: " << sokid::sdp::to_string(result.diffusion.diagnostics().status)
                << " after " << result.diffusion.diagnostics().newton_steps
                << " Newton steps\n";
    } else if (curves->parsed()) {
      sokid::cmd_export_curves(config, model_dir, out_path);
    } else if (eval->parsed()) {
      const auto m = sokid::cmd_eval(config, model_dir, out_path);
      std::cout << sokid::metrics_to_json(m).dump() << "\n";
    }
  } catch (const sokid::Error& e) {
    std::cerr << "error[" << sokid::to_string(e.kind()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
