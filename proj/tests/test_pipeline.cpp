#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>

#include "sokid/error.hpp"
#include "sokid/io.hpp"
#include "sokid/pipeline.hpp"
#include "sokid/serialization.hpp"

using namespace sokid;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "sokid_test_pipeline";
  fs::create_directories(dir);
  return dir / name;
}

// A small, quick configuration of the quadratic experiment.
RunConfig small_config() {
  RunConfig c;
  c.points = 21;
  c.ic_count = 3;
  c.trajectories_per_ic = 4;
  return c;
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char ch : text) n += ch == '\n';
  return n;
}

}  // namespace

TEST_CASE("config defaults, JSON round trip and validation") {
  const RunConfig d = config_from_json(json::object());
  CHECK(d.sde_name == "paper_quadratic");
  CHECK(d.points == 100);
  CHECK(d.ic_count == 10);
  CHECK(d.trajectories_per_ic == 10);
  CHECK(d.substeps == 10);
  CHECK(d.drift_kernel.bandwidth() == 1.0);
  CHECK(d.features.dimension() == 2);
  CHECK(d.lambda_drift == 1e-6);
  CHECK(d.lambda_diff == 1e-6);
  CHECK(d.eval_low == 0.0);
  CHECK(d.eval_high == 1.2);
  CHECK(d.eval_count == 121);

  const json j = R"({
    "sde": {"name": "ou", "params": {"theta": 2}},
    "simulation": {"times": [0, 0.5, 1], "initial_conditions": [0.1, 0.2],
                   "trajectories_per_ic": 3, "substeps": 4, "seed": 9},
    "drift": {"kernel": {"type": "gaussian", "bandwidth": 0.5}, "lambda": 0.01,
              "pairing": "all_pairs"},
    "diffusion": {"features": {"type": "polynomial_features", "p": 3}, "lambda": 0.1},
    "evaluation": {"low": -1, "high": 1, "count": 5},
    "output_dir": "results"
  })"_json;
  const RunConfig c = config_from_json(j);
  CHECK(c.sde_name == "ou");
  CHECK(c.sde_params.at("theta") == 2.0);
  CHECK(c.times.size() == 3);
  CHECK(c.initial_conditions.size() == 2);
  CHECK(c.seed == 9);
  CHECK(c.drift_kernel.bandwidth() == 0.5);
  CHECK(c.pairing == PairingMode::all_pairs);
  CHECK(c.features.dimension() == 3);
  CHECK(evaluation_grid(c) == std::vector<double>{-1.0, -0.5, 0.0, 0.5, 1.0});
  CHECK(config_to_json(config_from_json(config_to_json(c))) == config_to_json(c));

  auto expect_config_error = [](const char* text) {
    try {
      config_from_json(json::parse(text));
      FAIL("expected a config error for " << text);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::config);
    }
  };
  expect_config_error(R"({"simulation": {"substeps": 0}})");
  expect_config_error(R"({"sde": "nosuch"})");
  expect_config_error(R"({"evaluation": {"low": 1, "high": 1}})");
  expect_config_error(R"({"evaluation": {"count": 1}})");
  expect_config_error(R"({"drift": {"lambda": -1}})");
  expect_config_error(R"({"simulation": {"seed": "abc"}})");
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("simulate: default experiment and determinism") {
  const RunConfig c = config_from_json(json::object());
  const auto a = cmd_simulate(c, scratch("default.csv"), FileFormat::csv);
  CHECK(a.ensemble.group_count() == 10);
  CHECK(a.ensemble.intervals() == 99);
  CHECK(a.ensemble.group(0).trajectories() == 10);
  for (const auto& g : a.ensemble.groups()) {
    CHECK(g.initial_condition >= 0.1);
    CHECK(g.initial_condition <= 0.9);
  }
  const auto b = cmd_simulate(c, scratch("default_again.csv"), FileFormat::csv);
  CHECK(a.sha256 == b.sha256);
  CHECK(a.sha256 == file_hash(scratch("default.csv")));

  RunConfig other = c;
  other.seed = 2;
  CHECK(cmd_simulate(other, scratch("default2.csv"), FileFormat::csv).sha256 != a.sha256);

  RunConfig bad = c;
  bad.substeps = 0;
  CHECK_THROWS_AS(cmd_simulate(bad, scratch("bad.csv"), FileFormat::csv), Error);
}

TEST_CASE("fit writes models that reload and evaluate identically") {
  const RunConfig c = small_config();
  const auto data = scratch("small.json");
  cmd_simulate(c, data, FileFormat::json);
  const auto out = scratch("fit_small");
  const auto fit = cmd_fit(c, data, out);
  CHECK(fs::exists(out / drift_model_file));
  CHECK(fs::exists(out / diffusion_model_file));
  CHECK(fs::exists(out / run_report_file));
  CHECK(fit.diffusion.diagnostics().status == sdp::Status::optimal);
  CHECK(fit.report.at("diffusion").at("status") == "optimal");
  CHECK(fit.report.at("dataset").at("functionals") == 60);

  const auto loaded = load_models(out);
  CHECK(loaded.drift.alpha() == fit.drift.alpha());
  CHECK(loaded.diffusion.Q() == fit.diffusion.Q());
  for (double x : {0.0, 0.3, 0.77, 1.2}) {
    CHECK(loaded.drift(x) == fit.drift(x));
    CHECK(loaded.diffusion.sigma(x) == fit.diffusion.sigma(x));
  }

  // Refitting the same data gives byte-identical model files.
  const auto out2 = scratch("fit_small_again");
  cmd_fit(c, data, out2);
  CHECK(read_text(out / drift_model_file) == read_text(out2 / drift_model_file));
  CHECK(read_text(out / diffusion_model_file) == read_text(out2 / diffusion_model_file));

  // A stronger drift penalty shrinks the coefficients.
  RunConfig heavy = c;
  heavy.lambda_drift = 1e3;
  const auto shrunk = cmd_fit(heavy, data, scratch("fit_heavy"));
  CHECK(shrunk.drift.alpha().norm() < fit.drift.alpha().norm());

  // Changing the dataset after fitting invalidates the drift model.
  const auto moved = scratch("small_changed.json");
  fs::copy_file(data, moved, fs::copy_options::overwrite_existing);
  const auto out3 = scratch("fit_changed");
  cmd_fit(c, moved, out3);
  write_text(moved, read_text(scratch("default.csv")));
  try {
    load_drift_model(out3 / drift_model_file);
    FAIL("expected a hash mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
  }
}

TEST_CASE("fit surfaces the two-trajectory precondition") {
  RunConfig c = small_config();
  c.trajectories_per_ic = 1;
  const auto data = scratch("single.csv");
  cmd_simulate(c, data, FileFormat::csv);
  try {
    cmd_fit(c, data, scratch("fit_single"));
    FAIL("expected a validation error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::validation);
  }
}

TEST_CASE("curve export") {
  const RunConfig c = config_from_json(json::object());
  const auto truth = true_sde(c);
  const auto zero = [](double) { return 0.0; };
  const std::string csv = export_curves(zero, zero, truth, evaluation_grid(c));
  CHECK(csv.rfind("x,f_hat,sigma_hat,f_true,sigma_true\n", 0) == 0);
  CHECK(count_lines(csv) == 122);
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    std::istringstream cells(line);
    std::string x, f, s;
    std::getline(cells, x, ',');
    std::getline(cells, f, ',');
    std::getline(cells, s, ',');
    CHECK(std::stod(f) == 0.0);
    CHECK(std::stod(s) == 0.0);
  }
  const std::string bare = export_curves(zero, zero, std::nullopt, {0.0, 1.0});
  CHECK(bare == "x,f_hat,sigma_hat\n0,0,0\n1,0,0\n");

  const RunConfig small = small_config();
  const auto data = scratch("curves.csv");
  cmd_simulate(small, data, FileFormat::csv);
  const auto dir = scratch("fit_curves");
  cmd_fit(small, data, dir);
  const auto out = scratch("curves_out.csv");
  cmd_export_curves(small, dir, out);
  const std::string text = read_text(out);
  CHECK(count_lines(text) == 122);
  std::istringstream rows(text);
  std::getline(rows, line);
  while (std::getline(rows, line)) {
    std::istringstream cells(line);
    std::string x, f, s;
    std::getline(cells, x, ',');
    std::getline(cells, f, ',');
    std::getline(cells, s, ',');
    CHECK(std::stod(s) >= 0.0);
  }
}

TEST_CASE("metrics") {
  const auto truth = builtin_sde("paper_quadratic");
  std::vector<double> grid;
  for (int i = 0; i <= 120; ++i) grid.push_back(0.01 * i);
  const auto exact = compute_metrics(truth.drift, [&](double x) { return std::abs(truth.diffusion(x)); },
                                     truth, grid, 0.1, 0.9);
  CHECK(exact.drift_rel_l2 == 0.0);
  CHECK(exact.diffusion_rel_l2 == 0.0);
  CHECK(exact.points == 81);

  const auto zero = [](double) { return 0.0; };
  const auto none = compute_metrics(zero, zero, truth, grid, 0.1, 0.9);
  CHECK(none.drift_rel_l2 == doctest::Approx(1.0));
  CHECK(none.diffusion_rel_l2 == doctest::Approx(1.0));
  CHECK_THROWS_AS(compute_metrics(zero, zero, truth, grid, 5.0, 6.0), Error);

  RunConfig unknown = small_config();
  unknown.sde_name.reset();
  CHECK_THROWS_AS(cmd_eval(unknown, scratch("fit_curves"), scratch("m.json")), Error);
}

TEST_CASE("occupied range uses linear-interpolated percentiles") {
  std::vector<TrajectoryGroup> groups(1);
  groups[0].initial_condition = 0.0;
  groups[0].snapshots.resize(1, 101);
  for (int i = 0; i <= 100; ++i) groups[0].snapshots(0, i) = i;
  std::vector<double> times;
  for (int i = 0; i <= 100; ++i) times.push_back(i);
  const SnapshotEnsemble e(TimeGrid(times), groups);
  const auto [lo, hi] = occupied_range(e);
  CHECK(lo == doctest::Approx(5.0));
  CHECK(hi == doctest::Approx(95.0));
}
