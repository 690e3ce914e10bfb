#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "sokid/diffusion.hpp"
#include "sokid/drift.hpp"
#include "sokid/kernels.hpp"

namespace sokid {

nlohmann::json kernel_to_json(const GaussianKernel& kern);
nlohmann::json kernel_to_json(const FeatureMap& spec);
GaussianKernel gaussian_from_json(const nlohmann::json& j);
FeatureMap features_from_json(const nlohmann::json& j);

std::string to_string(PairingMode pairing);
PairingMode parse_pairing(const std::string& name);

/// Where a drift model's reference ensemble lives.
struct EnsembleRef {
  std::filesystem::path path;
  FileFormat format = FileFormat::csv;
  std::string sha256;
};

nlohmann::json drift_model_to_json(const DriftModel& model,
                                   const EnsembleRef& ref);
/// Reloads the referenced ensemble and checks its hash; a mismatch throws
/// Error(validation).
DriftModel drift_model_from_json(const nlohmann::json& j);

nlohmann::json diffusion_model_to_json(const DiffusionModel& model);
DiffusionModel diffusion_model_from_json(const nlohmann::json& j);

void save_drift_model(const DriftModel& model, const EnsembleRef& ref,
                      const std::filesystem::path& path);
DriftModel load_drift_model(const std::filesystem::path& path);
void save_diffusion_model(const DiffusionModel& model,
                          const std::filesystem::path& path);
DiffusionModel load_diffusion_model(const std::filesystem::path& path);

/// Parses JSON text, mapping failures to Error(parse) with `what` in the
/// message.
nlohmann::json parse_json(const std::string& text, const std::string& what);

}  // namespace sokid
