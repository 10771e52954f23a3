#include "mdat/cli/settings.hpp"

#include <fstream>
#include <stdexcept>

namespace mdat::cli {

namespace {

using json = nlohmann::json;

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
}

[[noreturn]] void unknown(const std::string& section, const std::string& key) {
  throw std::invalid_argument("unknown key '" + key + "' in " + section + " section");
}

void read_model(const json& j, ModelSettings& m) {
  require_object(j, "model");
  for (const auto& [key, value] : j.items()) {
    if (key == "kinds") {
      m.kinds = value.get<std::vector<std::string>>();
      for (const auto& k : m.kinds)
        if (k != "mdat" && k != "baseline") throw std::invalid_argument("unknown model kind '" + k + "'");
    } else if (key == "mdat") {
      require_object(value, "model.mdat");
      value.get<model::MdatConfig>();  // reject unknown keys now
      m.mdat.update(value);
    } else if (key == "baseline") {
      require_object(value, "model.baseline");
      value.get<baseline::BaselineConfig>();
      m.baseline.update(value);
    } else {
      unknown("model", key);
    }
  }
}

void read_data(const json& j, DataSettings& d) {
  require_object(j, "data");
  for (const auto& [key, value] : j.items()) {
    if (key == "length") d.length = value.get<std::size_t>();
    else if (key == "vocabulary") d.vocabulary = value.get<std::string>();
    else if (key == "sources") d.sources = value.get<std::vector<std::string>>();
    else if (key == "targets") d.targets = value.get<std::vector<std::string>>();
    else unknown("data", key);
  }
}

void read_experiment(const json& j, ExperimentSettings& e) {
  require_object(j, "experiment");
  for (const auto& [key, value] : j.items()) {
    if (key == "k") e.k = value.get<std::vector<std::size_t>>();
    else if (key == "seeds") e.seeds = value.get<std::size_t>();
    else if (key == "train_fraction") e.train_fraction = value.get<double>();
    else if (key == "gradcheck") e.gradcheck = value.get<bool>();
    else unknown("experiment", key);
  }
}

}  // namespace

Settings settings_from_json(const json& j, Settings base) {
  require_object(j, "config");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "model") read_model(value, base.model);
      else if (key == "train") {
        require_object(value, "train");
        value.get_to(base.train);
      } else if (key == "data") read_data(value, base.data);
      else if (key == "experiment") read_experiment(value, base.experiment);
      else throw std::invalid_argument("unknown config section '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return base;
}

Settings load_settings(const std::string& path, Settings base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  try {
    return settings_from_json(j, std::move(base));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

experiments::ModelConfig build_model_config(const ModelSettings& m, const std::string& kind,
                                            std::size_t speech_dim, std::size_t text_dim,
                                            std::size_t n_classes, std::size_t length) {
  if (kind == "mdat") {
    model::MdatConfig c;
    c.d_model = speech_dim;
    c.d_text = text_dim;
    c.n_classes = n_classes;
    c.seq_len = length;
    from_json(m.mdat, c);
    c.validate();
    return c;
  }
  if (kind == "baseline") {
    baseline::BaselineConfig c;
    c.d_model = speech_dim;
    c.d_text = text_dim;
    c.n_classes = n_classes;
    c.seq_len = length;
    from_json(m.baseline, c);
    c.validate();
    return c;
  }
  throw std::invalid_argument("unknown model kind '" + kind + "'");
}

}  // namespace mdat::cli
