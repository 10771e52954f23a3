#pragma once

#include <filesystem>
#include <optional>
#include <variant>

#include "json.hpp"
#include "mdat/baseline/baseline.hpp"
#include "mdat/dataio/dataset.hpp"
#include "mdat/model/checkpoint.hpp"
#include "mdat/model/mdat.hpp"

namespace mdat::experiments {

using numerics::Graph;
using numerics::ParamSet;
using numerics::Tensor;
using numerics::Var;

/// Either model family; everything downstream dispatches on this.
using ModelConfig = std::variant<model::MdatConfig, baseline::BaselineConfig>;

model::ModelKind kind_of(const ModelConfig& config);
std::size_t n_classes(const ModelConfig& config);
std::size_t seq_len(const ModelConfig& config);
std::size_t speech_dim(const ModelConfig& config);
std::size_t text_dim(const ModelConfig& config);
double dropout_p(const ModelConfig& config);
void validate(const ModelConfig& config);

std::vector<model::ParamSpec> param_specs(const ModelConfig& config);
ParamSet<float> init_params(const ModelConfig& config, std::uint64_t seed);

/// {"kind": "mdat"|"baseline", "config": {...}}
nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

/// Throws std::invalid_argument when the dataset's class count, length or
/// feature widths disagree with the config.
void check_compatible(const ModelConfig& config, const dataio::Dataset& data);

template <class Real>
Var<Real> model_logits(Graph<Real>& g, const ParamSet<Real>& params, const ModelConfig& config,
                       const model::ModelInput<Real>& input, model::ForwardContext<Real>& ctx) {
  return std::visit(
      [&](const auto& c) -> Var<Real> {
        if constexpr (std::is_same_v<std::decay_t<decltype(c)>, model::MdatConfig>) {
          return model::mdat_logits(g, params, c, input, ctx);
        } else {
          return baseline::baseline_logits(g, params, c, input, ctx);
        }
      },
      config);
}

/// Regularization term added to the training loss, if the model has one.
template <class Real>
std::optional<Var<Real>> model_penalty(Graph<Real>& g, const ParamSet<Real>& params,
                                       const ModelConfig& config) {
  if (const auto* b = std::get_if<baseline::BaselineConfig>(&config); b && b->l2 > 0.0) {
    return baseline::baseline_penalty(g, params, *b);
  }
  return std::nullopt;
}

/// A trained model as stored on disk.
struct SavedModel {
  ModelConfig config;
  dataio::LabelVocabulary vocab;
  ParamSet<float> params;
};

void save_model(const std::filesystem::path& path, const SavedModel& m);
SavedModel load_model(const std::filesystem::path& path);

}  // namespace mdat::experiments
