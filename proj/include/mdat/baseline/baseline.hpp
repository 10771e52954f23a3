#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdat/model/mdat.hpp"
#include "mdat/model/param_init.hpp"
#include "mdat/numerics/graph.hpp"

namespace mdat::baseline {

using model::ForwardContext;
using model::ModelInput;
using numerics::Graph;
using numerics::ParamSet;
using numerics::Tensor;
using numerics::Var;

struct BaselineConfig {
  std::size_t d_model = 1024;  // speech width; text is projected to it
  std::size_t d_text = 768;
  std::size_t seq_len = 128;
  std::size_t hidden = 128;      // LSTM width h per direction
  std::size_t head_width = 128;  // dense layer before the output
  std::size_t n_classes = 4;
  double dropout_p = 0.1;
  double l2 = 1e-4;  // on head.W

  void validate() const;
  friend bool operator==(const BaselineConfig&, const BaselineConfig&) = default;
};

void to_json(nlohmann::json& j, const BaselineConfig& c);
void from_json(const nlohmann::json& j, BaselineConfig& c);

std::vector<model::ParamSpec> baseline_param_specs(const BaselineConfig& config);
ParamSet<float> init_baseline_params(const BaselineConfig& config, std::uint64_t seed);

/// One LSTM direction. `prefix` names W_x (D x 4h), W_h (h x 4h) and b (4h),
/// gate blocks ordered input, forget, output, candidate. Returns T x h.
template <class Real>
Var<Real> lstm_encode(Var<Real> x, const ParamSet<Real>& params, const std::string& prefix,
                      bool reverse);

/// Forward and backward passes from zero states, joined per step: T x 2h.
template <class Real>
Var<Real> bilstm_encode(Var<Real> x, const ParamSet<Real>& params, const std::string& prefix);

template <class Real>
Var<Real> baseline_logits(Graph<Real>& g, const ParamSet<Real>& params, const BaselineConfig& config,
                          const ModelInput<Real>& input, ForwardContext<Real>& ctx);

/// l2 * ||head.W||^2, added to the training loss.
template <class Real>
Var<Real> baseline_penalty(Graph<Real>& g, const ParamSet<Real>& params, const BaselineConfig& config);

template <class Real>
Tensor<Real> baseline_predict(const ParamSet<Real>& params, const BaselineConfig& config,
                              const ModelInput<Real>& input);

}  // namespace mdat::baseline
