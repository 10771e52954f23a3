#include "mdat/model/param_init.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace mdat::model {

numerics::ParamSet<float> initialize(const std::vector<ParamSpec>& specs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  numerics::ParamSet<float> params;
  for (const auto& spec : specs) {
    numerics::Tensor<float> t(spec.shape);
    switch (spec.init) {
      case Init::zeros:
        break;
      case Init::ones:
        for (auto& v : t.data()) v = 1.0f;
        break;
      case Init::glorot: {
        const double fan_in = spec.shape.size() == 2 ? double(spec.shape[0]) : double(t.size());
        const double fan_out = spec.shape.size() == 2 ? double(spec.shape[1]) : 1.0;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& v : t.data()) {
          const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
          v = static_cast<float>((2.0 * u - 1.0) * limit);
        }
        break;
      }
    }
    params.add(spec.name, std::move(t));
  }
  return params;
}

void check_params(const numerics::ParamSet<float>& params, const std::vector<ParamSpec>& specs) {
  if (params.size() != specs.size()) {
    throw std::invalid_argument("parameter count " + std::to_string(params.size()) +
                                " does not match the configuration (" +
                                std::to_string(specs.size()) + ")");
  }
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& [name, tensor] = params.entries()[i];
    if (name != specs[i].name || tensor.shape() != specs[i].shape) {
      throw std::invalid_argument("parameter '" + name + "' " + numerics::shape_str(tensor.shape()) +
                                  " does not match expected '" + specs[i].name + "' " +
                                  numerics::shape_str(specs[i].shape));
    }
  }
}

}  // namespace mdat::model
