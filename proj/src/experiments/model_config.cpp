#include "mdat/experiments/model_config.hpp"

#include <stdexcept>

namespace mdat::experiments {

namespace {

template <class... Fs>
struct Overload : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overload(Fs...) -> Overload<Fs...>;

}  // namespace

model::ModelKind kind_of(const ModelConfig& config) {
  return std::holds_alternative<model::MdatConfig>(config) ? model::ModelKind::mdat
                                                           : model::ModelKind::baseline;
}

std::size_t n_classes(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.n_classes; }, config);
}

std::size_t seq_len(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.seq_len; }, config);
}

std::size_t speech_dim(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.d_model; }, config);
}

std::size_t text_dim(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.d_text; }, config);
}

double dropout_p(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.dropout_p; }, config);
}

void validate(const ModelConfig& config) {
  std::visit([](const auto& c) { c.validate(); }, config);
}

std::vector<model::ParamSpec> param_specs(const ModelConfig& config) {
  return std::visit(Overload{[](const model::MdatConfig& c) { return model::mdat_param_specs(c); },
                             [](const baseline::BaselineConfig& c) {
                               return baseline::baseline_param_specs(c);
                             }},
                    config);
}

ParamSet<float> init_params(const ModelConfig& config, std::uint64_t seed) {
  return model::initialize(param_specs(config), seed);
}

nlohmann::json config_to_json(const ModelConfig& config) {
  nlohmann::json inner = std::visit([](const auto& c) { return nlohmann::json(c); }, config);
  return {{"kind", model::to_string(kind_of(config))}, {"config", inner}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  const auto kind = model::model_kind_from_string(j.at("kind").get<std::string>());
  const auto& inner = j.at("config");
  ModelConfig out;
  if (kind == model::ModelKind::mdat) out = inner.get<model::MdatConfig>();
  else out = inner.get<baseline::BaselineConfig>();
  validate(out);
  return out;
}

void check_compatible(const ModelConfig& config, const dataio::Dataset& data) {
  if (data.vocab.size() != n_classes(config)) {
    throw std::invalid_argument("dataset has " + std::to_string(data.vocab.size()) +
                                " classes but the model expects " +
                                std::to_string(n_classes(config)));
  }
  if (data.size() == 0) return;
  if (data.length() != seq_len(config) || data.speech_dim() != speech_dim(config) ||
      data.text_dim() != text_dim(config)) {
    throw std::invalid_argument(
        "dataset shape T=" + std::to_string(data.length()) + " D_s=" +
        std::to_string(data.speech_dim()) + " D_t=" + std::to_string(data.text_dim()) +
        " does not match the model (T=" + std::to_string(seq_len(config)) + " D_s=" +
        std::to_string(speech_dim(config)) + " D_t=" + std::to_string(text_dim(config)) + ")");
  }
}

void save_model(const std::filesystem::path& path, const SavedModel& m) {
  model::check_params(m.params, param_specs(m.config));
  nlohmann::json doc = config_to_json(m.config);
  doc["vocabulary"] = m.vocab.names();
  model::Checkpoint ckpt{kind_of(m.config), doc.dump(), m.params};
  model::save_checkpoint(ckpt, path);
}

SavedModel load_model(const std::filesystem::path& path) {
  model::Checkpoint ckpt = model::load_checkpoint(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": embedded config is not valid JSON");
  }
  SavedModel m{config_from_json(doc),
               dataio::LabelVocabulary(doc.at("vocabulary").get<std::vector<std::string>>()),
               std::move(ckpt.params)};
  if (kind_of(m.config) != ckpt.kind) {
    throw std::invalid_argument(path.string() + ": model kind tag disagrees with embedded config");
  }
  model::check_params(m.params, param_specs(m.config));
  return m;
}

}  // namespace mdat::experiments
