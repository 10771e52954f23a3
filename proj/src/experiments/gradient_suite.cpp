#include "mdat/experiments/gradient_suite.hpp"

#include <algorithm>
#include <random>

#include "mdat/experiments/parallel.hpp"
#include "mdat/numerics/grad_check.hpp"

namespace mdat::experiments {

model::MdatConfig gradcheck_mdat_config() {
  model::MdatConfig c;
  c.d_model = 8;
  c.d_text = 6;
  c.graph_width = 8;
  c.seq_len = 6;
  c.n_heads = 2;
  c.d_ff = 16;
  c.n_classes = 4;
  c.dropout_p = 0.0;
  return c;
}

baseline::BaselineConfig gradcheck_baseline_config() {
  baseline::BaselineConfig c;
  c.d_model = 8;
  c.d_text = 6;
  c.seq_len = 6;
  c.hidden = 4;
  c.head_width = 8;
  c.n_classes = 4;
  c.dropout_p = 0.0;
  return c;
}

namespace {

template <class Real>
numerics::LossBuilder<Real> loss_builder(const ModelConfig& config, const model::ModelInput<double>& in,
                                         std::size_t label) {
  model::ModelInput<Real> input{in.speech.template cast<Real>(), in.text.template cast<Real>(),
                                in.speech_valid, in.text_valid};
  return [config, input, label](Graph<Real>& g, const ParamSet<Real>& p) {
    model::ForwardContext<Real> ctx;
    Var<Real> loss = cross_entropy(model_logits(g, p, config, input, ctx), label);
    if (auto penalty = model_penalty(g, p, config)) loss = add(loss, *penalty);
    return loss;
  };
}

}  // namespace

GradientCase check_model_gradients(const std::string& name, const ModelConfig& config,
                                   std::uint64_t seed) {
  validate(config);
  if (dropout_p(config) != 0.0) throw std::invalid_argument("gradient checks need dropout off");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  model::ModelInput<double> input;
  input.speech = Tensor<double>({seq_len(config), speech_dim(config)});
  input.text = Tensor<double>({seq_len(config), text_dim(config)});
  for (auto& v : input.speech.data()) v = unit(rng);
  for (auto& v : input.text.data()) v = unit(rng);
  input.speech_valid = input.text_valid = seq_len(config);
  const std::size_t label = std::uniform_int_distribution<std::size_t>(0, n_classes(config) - 1)(rng);

  const ParamSet<float> params = init_params(config, seed);
  const auto reference = loss_builder<long double>(config, input, label);
  const auto r64 = numerics::grad_check_mixed(loss_builder<double>(config, input, label), reference,
                                              params.cast<double>(), kGradEps);
  const auto r32 = numerics::grad_check_mixed(loss_builder<float>(config, input, label), reference,
                                              params, kGradEps);
  GradientCase c;
  c.name = name;
  c.err64 = r64.max_tensor_rel_error;
  c.err32 = r32.max_tensor_rel_error;
  c.worst_tensor = c.err64 / kTol64 >= c.err32 / kTol32 ? r64.worst_tensor : r32.worst_tensor;
  c.entry64 = r64.max_rel_error;
  c.entry32 = r32.max_rel_error;
  c.entries = r64.entries_checked + r64.kinks_skipped;
  c.kinks_skipped = std::max(r64.kinks_skipped, r32.kinks_skipped);
  return c;
}

namespace {

std::vector<GradientCase> run_cases(const std::vector<std::pair<std::string, ModelConfig>>& cases,
                                    std::uint64_t seed, std::size_t jobs) {
  std::vector<GradientCase> out(cases.size());
  parallel_for(cases.size(), jobs, [&](std::size_t i) {
    out[i] = check_model_gradients(cases[i].first, cases[i].second, seed);
  });
  return out;
}

std::vector<std::pair<std::string, ModelConfig>> ablation_cases(const model::MdatConfig& style) {
  model::MdatConfig small = gradcheck_mdat_config();
  small.coatt_mode = style.coatt_mode;
  small.leaky_slope = style.leaky_slope;
  small.ln_eps = style.ln_eps;
  small.mask_padding = style.mask_padding;
  std::vector<std::pair<std::string, ModelConfig>> cases;
  for (int m = 1; m <= 7; ++m) {
    cases.emplace_back("mdat-model" + std::to_string(m), model::ablation_config(small, m));
  }
  return cases;
}

}  // namespace

std::vector<GradientCase> ablation_gradient_checks(const model::MdatConfig& style,
                                                   std::uint64_t seed, std::size_t jobs) {
  return run_cases(ablation_cases(style), seed, jobs);
}

std::vector<GradientCase> run_gradient_suite(std::uint64_t seed, std::size_t jobs) {
  auto cases = ablation_cases(gradcheck_mdat_config());
  cases.emplace_back("baseline", gradcheck_baseline_config());
  return run_cases(cases, seed, jobs);
}

bool passes(const GradientCase& c) { return c.err64 < kTol64 && c.err32 < kTol32; }

}  // namespace mdat::experiments
