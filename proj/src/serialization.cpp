#include "sokid/serialization.hpp"

#include "sokid/error.hpp"
#include "sokid/io.hpp"

namespace sokid {

using nlohmann::json;

namespace {

json matrix_rows(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_rows(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r == 0 ? Eigen::Index{0}
                        : static_cast<Eigen::Index>(rows.at(0).size());
  Eigen::MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const auto& row = rows.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != c) {
      throw Error(ErrorKind::parse, "ragged matrix in model file");
    }
    for (Eigen::Index j = 0; j < c; ++j) {
      M(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
    }
  }
  return M;
}

Eigen::VectorXd vector_from_json(const json& values) {
  const auto v = values.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(),
                                           static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

sdp::Status parse_status(const std::string& s) {
  if (s == "optimal") return sdp::Status::optimal;
  if (s == "max_iterations") return sdp::Status::max_iterations;
  if (s == "infeasible_start") return sdp::Status::infeasible_start;
  throw Error(ErrorKind::parse, "unknown solver status '" + s + "'");
}

template <typename F>
auto guarded(const char* what, F&& body) {
  try {
    return body();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string(what) + ": " + e.what());
  }
}

}  // namespace

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, "malformed JSON in " + what + ": " + e.what());
  }
}

json kernel_to_json(const GaussianKernel& kern) {
  return {{"type", "gaussian"}, {"bandwidth", kern.bandwidth()}};
}

json kernel_to_json(const FeatureMap& spec) {
  return {{"type", "polynomial_features"}, {"p", spec.dimension()}};
}

GaussianKernel gaussian_from_json(const json& j) {
  return guarded("drift kernel", [&] {
    const auto type = j.value("type", std::string("gaussian"));
    if (type != "gaussian") {
      throw Error(ErrorKind::config,
                  "drift kernel type must be 'gaussian', got '" + type + "'");
    }
    return GaussianKernel(j.value("bandwidth", 1.0));
  });
}

FeatureMap features_from_json(const json& j) {
  return guarded("diffusion features", [&] {
    const auto type = j.value("type", std::string("polynomial_features"));
    if (type != "polynomial_features") {
      throw Error(ErrorKind::config,
                  "feature type must be 'polynomial_features', got '" + type + "'");
    }
    return FeatureMap(j.value("p", 2));
  });
}

std::string to_string(PairingMode pairing) {
  return pairing == PairingMode::independent_copies ? "independent_copies"
                                                    : "all_pairs";
}

PairingMode parse_pairing(const std::string& name) {
  if (name == "independent_copies") return PairingMode::independent_copies;
  if (name == "all_pairs") return PairingMode::all_pairs;
  throw Error(ErrorKind::config, "unknown pairing '" + name +
                                     "' (expected independent_copies or all_pairs)");
}

json drift_model_to_json(const DriftModel& model, const EnsembleRef& ref) {
  json j;
  j["model"] = "drift";
  j["kernel"] = kernel_to_json(model.kernel());
  j["lambda"] = model.lambda();
  j["pairing"] = to_string(model.pairing());
  j["used_fallback_solver"] = model.used_fallback();
  j["alpha"] = to_std(model.alpha());
  j["ensemble"] = {{"path", ref.path.string()},
                   {"format", ref.format == FileFormat::csv ? "csv" : "json"},
                   {"sha256", ref.sha256}};
  return j;
}

DriftModel drift_model_from_json(const json& j) {
  return guarded("drift model", [&] {
    if (j.at("model") != "drift") {
      throw Error(ErrorKind::parse, "not a drift model file");
    }
    const auto& ref = j.at("ensemble");
    const std::filesystem::path path = ref.at("path").get<std::string>();
    const std::string expected = ref.at("sha256").get<std::string>();
    const std::string actual = file_hash(path);
    if (actual != expected) {
      throw Error(ErrorKind::validation,
                  "reference ensemble '" + path.string() +
                      "' changed since the drift model was fitted (sha256 " +
                      actual + ", expected " + expected + ")");
    }
    auto ensemble = std::make_shared<const SnapshotEnsemble>(load_ensemble(
        path, parse_format(ref.at("format").get<std::string>())));
    return DriftModel(std::move(ensemble), gaussian_from_json(j.at("kernel")),
                      j.at("lambda").get<double>(),
                      vector_from_json(j.at("alpha")),
                      parse_pairing(j.at("pairing").get<std::string>()),
                      j.value("used_fallback_solver", false));
  });
}

json diffusion_model_to_json(const DiffusionModel& model) {
  const auto& d = model.diagnostics();
  json j;
  j["model"] = "diffusion";
  j["features"] = kernel_to_json(model.features());
  j["lambda"] = model.lambda();
  j["alpha"] = to_std(model.alpha());
  j["Q"] = matrix_rows(model.Q());
  j["solver"] = {{"status", sdp::to_string(d.status)},
                 {"newton_steps", d.newton_steps},
                 {"outer_iterations", d.outer_iterations},
                 {"gap", d.gap},
                 {"objective", d.objective},
                 {"min_eig_before_clamp", d.min_eig_before_clamp},
                 {"clamp_magnitude", d.clamp_magnitude},
                 {"ridge_added", d.ridge_added},
                 {"cost_scale", d.cost_scale},
                 {"variable_scale", d.variable_scale},
                 {"epigraph_rank", d.epigraph_rank},
                 {"reduced_dimension", d.reduced_dimension},
                 {"start_scale", d.start_scale}};
  return j;
}

DiffusionModel diffusion_model_from_json(const json& j) {
  return guarded("diffusion model", [&] {
    if (j.at("model") != "diffusion") {
      throw Error(ErrorKind::parse, "not a diffusion model file");
    }
    DiffusionDiagnostics d;
    if (j.contains("solver")) {
      const auto& s = j.at("solver");
      d.status = parse_status(s.value("status", std::string("optimal")));
      d.newton_steps = s.value("newton_steps", 0);
      d.outer_iterations = s.value("outer_iterations", 0);
      d.gap = s.value("gap", 0.0);
      d.objective = s.value("objective", 0.0);
      d.min_eig_before_clamp = s.value("min_eig_before_clamp", 0.0);
      d.clamp_magnitude = s.value("clamp_magnitude", 0.0);
      d.ridge_added = s.value("ridge_added", false);
      d.cost_scale = s.value("cost_scale", 1.0);
      d.variable_scale = s.value("variable_scale", 1.0);
      d.epigraph_rank = s.value("epigraph_rank", Eigen::Index{0});
      d.reduced_dimension = s.value("reduced_dimension", Eigen::Index{0});
      d.start_scale = s.value("start_scale", 0.0);
    }
    Eigen::VectorXd alpha;
    if (j.contains("alpha")) alpha = vector_from_json(j.at("alpha"));
    return DiffusionModel(features_from_json(j.at("features")),
                          matrix_from_rows(j.at("Q")), j.at("lambda").get<double>(),
                          std::move(alpha), d);
  });
}

void save_drift_model(const DriftModel& model, const EnsembleRef& ref,
                      const std::filesystem::path& path) {
  write_text(path, drift_model_to_json(model, ref).dump(1) + "\n");
}

DriftModel load_drift_model(const std::filesystem::path& path) {
  return drift_model_from_json(parse_json(read_text(path), path.string()));
}

void save_diffusion_model(const DiffusionModel& model,
                          const std::filesystem::path& path) {
  write_text(path, diffusion_model_to_json(model).dump(1) + "\n");
}

DiffusionModel load_diffusion_model(const std::filesystem::path& path) {
  return diffusion_model_from_json(parse_json(read_text(path), path.string()));
}

}  // namespace sokid
