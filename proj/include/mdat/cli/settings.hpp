#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdat/experiments/training.hpp"

namespace mdat::cli {

/// Model sections are kept as partial JSON so they can be laid over values
/// derived from the data (widths, class count, length).
struct ModelSettings {
  std::vector<std::string> kinds{"mdat"};
  nlohmann::json mdat = nlohmann::json::object();
  nlohmann::json baseline = nlohmann::json::object();
};

struct DataSettings {
  std::optional<std::size_t> length;  // unset: longest sequence in the inputs
  std::string vocabulary = "basic4";
  std::vector<std::string> sources;
  std::vector<std::string> targets;
};

struct ExperimentSettings {
  std::vector<std::size_t> k{0, 5, 10, 15};
  std::size_t seeds = 5;
  double train_fraction = 0.8;
  bool gradcheck = true;
};

struct Settings {
  ModelSettings model;
  experiments::TrainConfig train;
  DataSettings data;
  ExperimentSettings experiment;
};

/// Sections "model", "train", "data", "experiment"; every level rejects
/// unknown keys with std::invalid_argument. Keys absent from `j` keep the
/// values already in `base`.
Settings settings_from_json(const nlohmann::json& j, Settings base = {});
Settings load_settings(const std::string& path, Settings base = {});

/// Model config for `kind` ("mdat" or "baseline"): library defaults, then
/// the given data dimensions, then the settings overlay.
experiments::ModelConfig build_model_config(const ModelSettings& m, const std::string& kind,
                                            std::size_t speech_dim, std::size_t text_dim,
                                            std::size_t n_classes, std::size_t length);

}  // namespace mdat::cli
