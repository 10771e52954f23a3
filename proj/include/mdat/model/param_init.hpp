#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdat/numerics/param_set.hpp"

namespace mdat::model {

enum class Init { glorot, zeros, ones };

struct ParamSpec {
  std::string name;
  numerics::Shape shape;
  Init init = Init::zeros;
};

/// Draws every parameter in order from one seeded stream. Glorot entries are
/// uniform in +-sqrt(6 / (fan_in + fan_out)); a rank-1 tensor of length n
/// counts as fan_in n, fan_out 1.
numerics::ParamSet<float> initialize(const std::vector<ParamSpec>& specs, std::uint64_t seed);

/// Throws std::invalid_argument unless `params` holds exactly `specs`
/// (same names, order and shapes).
void check_params(const numerics::ParamSet<float>& params, const std::vector<ParamSpec>& specs);

}  // namespace mdat::model
