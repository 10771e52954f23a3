#include "mdat/baseline/baseline.hpp"

#include <stdexcept>

namespace mdat::baseline {

using model::Init;
using model::ParamSpec;

namespace {

void append_lstm(std::vector<ParamSpec>& specs, const std::string& p, std::size_t d, std::size_t h) {
  specs.push_back({p + ".W_x", {d, 4 * h}, Init::glorot});
  specs.push_back({p + ".W_h", {h, 4 * h}, Init::glorot});
  specs.push_back({p + ".b", {4 * h}, Init::zeros});
}

}  // namespace

void BaselineConfig::validate() const {
  if (d_model == 0 || d_text == 0 || seq_len == 0 || hidden == 0 || head_width == 0 ||
      n_classes < 2) {
    throw std::invalid_argument("baseline dimensions must be positive (and at least 2 classes)");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw std::invalid_argument("dropout_p must lie in [0, 1)");
  }
  if (!(l2 >= 0.0)) throw std::invalid_argument("l2 must be >= 0");
}

void to_json(nlohmann::json& j, const BaselineConfig& c) {
  j = nlohmann::json{{"d_model", c.d_model},   {"d_text", c.d_text},
                     {"seq_len", c.seq_len},   {"hidden", c.hidden},
                     {"head_width", c.head_width}, {"n_classes", c.n_classes},
                     {"dropout_p", c.dropout_p},   {"l2", c.l2}};
}

void from_json(const nlohmann::json& j, BaselineConfig& c) {
  BaselineConfig out = c;
  for (const auto& [key, value] : j.items()) {
    if (key == "d_model") out.d_model = value.get<std::size_t>();
    else if (key == "d_text") out.d_text = value.get<std::size_t>();
    else if (key == "seq_len") out.seq_len = value.get<std::size_t>();
    else if (key == "hidden") out.hidden = value.get<std::size_t>();
    else if (key == "head_width") out.head_width = value.get<std::size_t>();
    else if (key == "n_classes") out.n_classes = value.get<std::size_t>();
    else if (key == "dropout_p") out.dropout_p = value.get<double>();
    else if (key == "l2") out.l2 = value.get<double>();
    else throw std::invalid_argument("unknown baseline config key '" + key + "'");
  }
  c = out;
}

std::vector<ParamSpec> baseline_param_specs(const BaselineConfig& c) {
  c.validate();
  std::vector<ParamSpec> specs;
  specs.push_back({"proj.W_c", {c.d_text, c.d_model}, Init::glorot});
  specs.push_back({"proj.b_c", {c.d_model}, Init::zeros});
  for (const char* m : {"lstm_s", "lstm_t"}) {
    append_lstm(specs, std::string(m) + ".fwd", c.d_model, c.hidden);
    append_lstm(specs, std::string(m) + ".bwd", c.d_model, c.hidden);
  }
  specs.push_back({"head.W", {4 * c.hidden, c.head_width}, Init::glorot});
  specs.push_back({"head.b", {c.head_width}, Init::zeros});
  specs.push_back({"out.W", {c.head_width, c.n_classes}, Init::glorot});
  specs.push_back({"out.b", {c.n_classes}, Init::zeros});
  return specs;
}

ParamSet<float> init_baseline_params(const BaselineConfig& config, std::uint64_t seed) {
  return model::initialize(baseline_param_specs(config), seed);
}

template <class Real>
Var<Real> lstm_encode(Var<Real> x, const ParamSet<Real>& params, const std::string& prefix,
                      bool reverse) {
  Graph<Real>& g = *x.graph;
  Var<Real> w_h = g.parameter(params, prefix + ".W_h");
  const std::size_t h = w_h.rows();
  const std::size_t t_len = x.rows();
  // Input contributions for every step at once.
  Var<Real> gates_x = affine(x, g.parameter(params, prefix + ".W_x"), g.parameter(params, prefix + ".b"));
  Var<Real> hidden = g.constant(Tensor<Real>({1, h}));
  Var<Real> cell = hidden;
  std::vector<Var<Real>> steps(t_len);
  for (std::size_t k = 0; k < t_len; ++k) {
    const std::size_t t = reverse ? t_len - 1 - k : k;
    Var<Real> z = add(slice_rows(gates_x, t, 1), matmul(hidden, w_h));
    Var<Real> i = sigmoid(slice_cols(z, 0, h));
    Var<Real> f = sigmoid(slice_cols(z, h, h));
    Var<Real> o = sigmoid(slice_cols(z, 2 * h, h));
    Var<Real> cand = tanh(slice_cols(z, 3 * h, h));
    cell = add(mul(f, cell), mul(i, cand));
    hidden = mul(o, tanh(cell));
    steps[t] = hidden;
  }
  Var<Real> out = steps[0];
  for (std::size_t t = 1; t < t_len; ++t) out = concat_rows(out, steps[t]);
  return out;
}

template <class Real>
Var<Real> bilstm_encode(Var<Real> x, const ParamSet<Real>& params, const std::string& prefix) {
  return concat_cols(lstm_encode(x, params, prefix + ".fwd", false),
                     lstm_encode(x, params, prefix + ".bwd", true));
}

template <class Real>
Var<Real> baseline_logits(Graph<Real>& g, const ParamSet<Real>& params, const BaselineConfig& config,
                          const ModelInput<Real>& input, ForwardContext<Real>& ctx) {
  if (input.speech.cols() != config.d_model || input.text.cols() != config.d_text) {
    throw numerics::ShapeError("input widths " + std::to_string(input.speech.cols()) + "/" +
                               std::to_string(input.text.cols()) + " do not match config " +
                               std::to_string(config.d_model) + "/" +
                               std::to_string(config.d_text));
  }
  if (input.speech.rows() != config.seq_len || input.text.rows() != config.seq_len) {
    throw numerics::ShapeError("input length differs from configured length " +
                               std::to_string(config.seq_len));
  }
  Var<Real> speech = g.constant(input.speech);
  Var<Real> text = affine(g.constant(input.text), g.parameter(params, "proj.W_c"),
                          g.parameter(params, "proj.b_c"));
  Var<Real> pooled = concat_cols(mean_rows(bilstm_encode(speech, params, "lstm_s")),
                                 mean_rows(bilstm_encode(text, params, "lstm_t")));
  Var<Real> hidden = relu(affine(pooled, g.parameter(params, "head.W"), g.parameter(params, "head.b")));
  hidden = dropout(hidden, static_cast<Real>(config.dropout_p), ctx.train, ctx.rng);
  return affine(hidden, g.parameter(params, "out.W"), g.parameter(params, "out.b"));
}

template <class Real>
Var<Real> baseline_penalty(Graph<Real>& g, const ParamSet<Real>& params, const BaselineConfig& config) {
  Var<Real> w = g.parameter(params, "head.W");
  return scale(sum_all(mul(w, w)), static_cast<Real>(config.l2));
}

template <class Real>
Tensor<Real> baseline_predict(const ParamSet<Real>& params, const BaselineConfig& config,
                              const ModelInput<Real>& input) {
  Graph<Real> g;
  ForwardContext<Real> ctx;
  return numerics::softmax_rows(baseline_logits(g, params, config, input, ctx).value());
}

#define MDAT_INSTANTIATE_BASELINE(R)                                                           \
  template Var<R> lstm_encode(Var<R>, const ParamSet<R>&, const std::string&, bool);           \
  template Var<R> bilstm_encode(Var<R>, const ParamSet<R>&, const std::string&);               \
  template Var<R> baseline_logits(Graph<R>&, const ParamSet<R>&, const BaselineConfig&,        \
                                  const ModelInput<R>&, ForwardContext<R>&);                   \
  template Var<R> baseline_penalty(Graph<R>&, const ParamSet<R>&, const BaselineConfig&);      \
  template Tensor<R> baseline_predict(const ParamSet<R>&, const BaselineConfig&, const ModelInput<R>&);

MDAT_INSTANTIATE_BASELINE(float)
MDAT_INSTANTIATE_BASELINE(double)
MDAT_INSTANTIATE_BASELINE(long double)

#undef MDAT_INSTANTIATE_BASELINE

}  // namespace mdat::baseline
