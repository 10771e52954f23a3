#include "mdat/model/mdat.hpp"

#include <cmath>
#include <stdexcept>

namespace mdat::model {

using numerics::Shape;

namespace {

// Additive key mask: 0 for valid columns, a large negative for padding.
// Finite so the tape's finiteness check still holds.
constexpr double kMaskValue = -1e9;

template <class Real>
Var<Real> mask_columns(Var<Real> scores, std::size_t valid_cols) {
  const std::size_t rows = scores.rows(), cols = scores.cols();
  if (valid_cols == 0 || valid_cols >= cols) return scores;
  Tensor<Real> mask({rows, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = valid_cols; c < cols; ++c) mask.at(r, c) = Real(kMaskValue);
  return add(scores, scores.graph->constant(std::move(mask)));
}

// Graph nodes are speech steps 0..T-1 then text steps 0..T-1.
template <class Real>
Var<Real> mask_graph_nodes(Var<Real> scores, std::size_t t, const ValidLengths& lengths) {
  if (!lengths.masked || (lengths.speech >= t && lengths.text >= t)) return scores;
  const std::size_t n = scores.cols();
  Tensor<Real> mask({n, n});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = lengths.speech; c < t; ++c) mask.at(r, c) = Real(kMaskValue);
    for (std::size_t c = t + lengths.text; c < n; ++c) mask.at(r, c) = Real(kMaskValue);
  }
  return add(scores, scores.graph->constant(std::move(mask)));
}

template <class Real>
Var<Real> ones(Graph<Real>& g, std::size_t rows, std::size_t cols) {
  return g.constant(Tensor<Real>::filled({rows, cols}, Real(1)));
}

template <class Real>
Var<Real> pool(Var<Real> x, std::size_t valid, bool masked) {
  const std::size_t t = x.rows();
  if (!masked || valid == 0 || valid >= t) return mean_rows(x);
  Tensor<Real> w({1, t});
  for (std::size_t i = 0; i < valid; ++i) w[i] = Real(1) / Real(valid);
  return matmul(x.graph->constant(std::move(w)), x);
}

void append_encoder_specs(std::vector<ParamSpec>& specs, const std::string& p, std::size_t d,
                          std::size_t ff) {
  specs.push_back({p + ".W_q", {d, d}, Init::glorot});
  specs.push_back({p + ".b_q", {d}, Init::zeros});
  specs.push_back({p + ".W_k", {d, d}, Init::glorot});
  specs.push_back({p + ".W_v", {d, d}, Init::glorot});
  specs.push_back({p + ".b_v", {d}, Init::zeros});
  specs.push_back({p + ".W_o", {d, d}, Init::glorot});
  specs.push_back({p + ".b_o", {d}, Init::zeros});
  specs.push_back({p + ".ln1.gamma", {d}, Init::ones});
  specs.push_back({p + ".ln1.beta", {d}, Init::zeros});
  specs.push_back({p + ".ff1.W", {d, ff}, Init::glorot});
  specs.push_back({p + ".ff1.b", {ff}, Init::zeros});
  specs.push_back({p + ".ff2.W", {ff, d}, Init::glorot});
  specs.push_back({p + ".ff2.b", {d}, Init::zeros});
  specs.push_back({p + ".ln2.gamma", {d}, Init::ones});
  specs.push_back({p + ".ln2.beta", {d}, Init::zeros});
}

}  // namespace

const char* to_string(CoAttentionMode mode) {
  return mode == CoAttentionMode::context ? "context" : "gate";
}

CoAttentionMode coattention_mode_from_string(const std::string& s) {
  if (s == "context") return CoAttentionMode::context;
  if (s == "gate") return CoAttentionMode::gate;
  throw std::invalid_argument("unknown co-attention mode '" + s + "'");
}

void MdatConfig::validate() const {
  if (d_model == 0 || d_text == 0 || seq_len == 0 || n_classes < 2 || n_heads == 0) {
    throw std::invalid_argument("model dimensions must be positive (and at least 2 classes)");
  }
  if (!(leaky_slope > 0.0 && leaky_slope <= 1.0)) {
    throw std::invalid_argument("leaky_slope must lie in (0, 1]");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw std::invalid_argument("dropout_p must lie in [0, 1)");
  }
  if (!(ln_eps > 0.0)) throw std::invalid_argument("ln_eps must be positive");
  if (use_transformer && encoder_width() % n_heads != 0) {
    throw std::invalid_argument("encoder width " + std::to_string(encoder_width()) +
                                " is not divisible by n_heads " + std::to_string(n_heads));
  }
}

void to_json(nlohmann::json& j, const MdatConfig& c) {
  j = nlohmann::json{{"d_model", c.d_model},
                     {"d_text", c.d_text},
                     {"graph_width", c.graph_width},
                     {"seq_len", c.seq_len},
                     {"n_heads", c.n_heads},
                     {"d_ff", c.d_ff},
                     {"n_classes", c.n_classes},
                     {"leaky_slope", c.leaky_slope},
                     {"dropout_p", c.dropout_p},
                     {"ln_eps", c.ln_eps},
                     {"coatt_mode", to_string(c.coatt_mode)},
                     {"use_graph", c.use_graph},
                     {"use_coatt", c.use_coatt},
                     {"use_transformer", c.use_transformer},
                     {"mask_padding", c.mask_padding}};
}

void from_json(const nlohmann::json& j, MdatConfig& c) {
  MdatConfig out = c;
  for (const auto& [key, value] : j.items()) {
    if (key == "d_model") out.d_model = value.get<std::size_t>();
    else if (key == "d_text") out.d_text = value.get<std::size_t>();
    else if (key == "graph_width") out.graph_width = value.get<std::size_t>();
    else if (key == "seq_len") out.seq_len = value.get<std::size_t>();
    else if (key == "n_heads") out.n_heads = value.get<std::size_t>();
    else if (key == "d_ff") out.d_ff = value.get<std::size_t>();
    else if (key == "n_classes") out.n_classes = value.get<std::size_t>();
    else if (key == "leaky_slope") out.leaky_slope = value.get<double>();
    else if (key == "dropout_p") out.dropout_p = value.get<double>();
    else if (key == "ln_eps") out.ln_eps = value.get<double>();
    else if (key == "coatt_mode") out.coatt_mode = coattention_mode_from_string(value.get<std::string>());
    else if (key == "use_graph") out.use_graph = value.get<bool>();
    else if (key == "use_coatt") out.use_coatt = value.get<bool>();
    else if (key == "use_transformer") out.use_transformer = value.get<bool>();
    else if (key == "mask_padding") out.mask_padding = value.get<bool>();
    else throw std::invalid_argument("unknown model config key '" + key + "'");
  }
  c = out;
}

const std::array<AblationFlags, 7>& ablation_grid() {
  static const std::array<AblationFlags, 7> grid = {{
      {1, true, true, true},
      {2, true, true, false},
      {3, true, false, false},
      {4, false, true, false},
      {5, false, false, true},
      {6, false, true, true},
      {7, true, false, true},
  }};
  return grid;
}

MdatConfig ablation_config(const MdatConfig& base, int index) {
  if (index < 1 || index > 7) throw std::out_of_range("ablation model index must be 1..7");
  const auto& f = ablation_grid()[static_cast<std::size_t>(index - 1)];
  MdatConfig c = base;
  c.use_graph = f.graph;
  c.use_coatt = f.coatt;
  c.use_transformer = f.transformer;
  return c;
}

template <class Real>
ModelInput<Real> make_input(const dataio::LoadedSample& sample) {
  ModelInput<Real> in;
  in.speech = sample.speech.values().template cast<Real>();
  in.text = sample.text.values().template cast<Real>();
  in.speech_valid = sample.speech_valid;
  in.text_valid = sample.text_valid;
  return in;
}

std::vector<ParamSpec> mdat_param_specs(const MdatConfig& c) {
  c.validate();
  std::vector<ParamSpec> specs;
  specs.push_back({"proj.W_c", {c.d_text, c.d_model}, Init::glorot});
  specs.push_back({"proj.b_c", {c.d_model}, Init::zeros});
  if (c.use_graph) {
    specs.push_back({"gat.W", {c.d_model, c.graph_out()}, Init::glorot});
    specs.push_back({"gat.a", {2 * c.graph_out()}, Init::glorot});
  }
  if (c.use_coatt) {
    const std::size_t w = c.fused_width();
    specs.push_back({"coatt.W_s", {w, w}, Init::glorot});
    specs.push_back({"coatt.b_s", {w}, Init::zeros});
    specs.push_back({"coatt.W_t", {w, w}, Init::glorot});
    specs.push_back({"coatt.b_t", {w}, Init::zeros});
  }
  if (c.use_transformer) {
    append_encoder_specs(specs, "enc_s", c.encoder_width(), c.ff_width());
    append_encoder_specs(specs, "enc_t", c.encoder_width(), c.ff_width());
  }
  specs.push_back({"cls.W", {2 * c.encoder_width(), c.n_classes}, Init::glorot});
  specs.push_back({"cls.b", {c.n_classes}, Init::zeros});
  return specs;
}

ParamSet<float> init_mdat_params(const MdatConfig& config, std::uint64_t seed) {
  return initialize(mdat_param_specs(config), seed);
}

template <class Real>
ModalityPair<Real> project_inputs(Graph<Real>& g, const ParamSet<Real>& params,
                                  const MdatConfig& config, const ModelInput<Real>& input) {
  if (input.speech.cols() != config.d_model || input.text.cols() != config.d_text) {
    throw numerics::ShapeError("input widths " + std::to_string(input.speech.cols()) + "/" +
                               std::to_string(input.text.cols()) + " do not match config " +
                               std::to_string(config.d_model) + "/" +
                               std::to_string(config.d_text));
  }
  if (input.speech.rows() != input.text.rows()) {
    throw numerics::ShapeError("speech and text must be aligned to the same length");
  }
  Var<Real> speech = g.constant(input.speech);
  Var<Real> text = g.constant(input.text);
  Var<Real> projected =
      affine(text, g.parameter(params, "proj.W_c"), g.parameter(params, "proj.b_c"));
  return {speech, projected};
}

template <class Real>
ModalityPair<Real> graph_attention(ModalityPair<Real> in, const ParamSet<Real>& params,
                                   const MdatConfig& config, const ValidLengths& lengths,
                                   ForwardContext<Real>& ctx) {
  if (in.speech.rows() != in.text.rows() || in.speech.cols() != in.text.cols()) {
    throw numerics::ShapeError("graph attention: modalities must share length and width");
  }
  Graph<Real>& g = *in.speech.graph;
  const std::size_t t = in.speech.rows();
  const std::size_t n = 2 * t;
  const std::size_t u = config.graph_out();

  Var<Real> z = concat_rows(in.speech, in.text);
  Var<Real> h = matmul(z, g.parameter(params, "gat.W"));
  Var<Real> a = g.parameter(params, "gat.a");
  Var<Real> s_src = matmul(h, transpose(slice_cols(a, 0, u)));  // n x 1
  Var<Real> s_dst = matmul(h, transpose(slice_cols(a, u, u)));  // n x 1
  // pairwise[i][j] = s_src[i] + s_dst[j]
  Var<Real> pairwise =
      add(matmul(s_src, ones(g, 1, n)), matmul(ones(g, n, 1), transpose(s_dst)));
  Var<Real> scores = leaky_relu(pairwise, static_cast<Real>(config.leaky_slope));
  Var<Real> alpha = softmax_rows(mask_graph_nodes(scores, t, lengths));
  Var<Real> updated = matmul(alpha, h);

  if (ctx.trace) {
    ctx.trace->nodes = z.value();
    ctx.trace->projected = h.value();
    ctx.trace->scores = scores.value();
    ctx.trace->graph_attn = alpha.value();
  }
  return {slice_rows(updated, 0, t), slice_rows(updated, t, t)};
}

template <class Real>
ModalityPair<Real> co_attention(ModalityPair<Real> in, const ParamSet<Real>& params,
                                const MdatConfig& config, const ValidLengths& lengths,
                                ForwardContext<Real>& ctx) {
  if (in.speech.rows() != in.text.rows() || in.speech.cols() != in.text.cols()) {
    throw numerics::ShapeError("co-attention: modalities must share length and width, got " +
                               numerics::shape_str(in.speech.shape()) + " and " +
                               numerics::shape_str(in.text.shape()));
  }
  Graph<Real>& g = *in.speech.graph;
  const std::size_t width = in.speech.cols();

  Var<Real> hs = affine(in.speech, g.parameter(params, "coatt.W_s"), g.parameter(params, "coatt.b_s"));
  Var<Real> ht = affine(in.text, g.parameter(params, "coatt.W_t"), g.parameter(params, "coatt.b_t"));
  Var<Real> affinity = matmul(hs, transpose(ht));  // T_s x T_t
  Var<Real> alpha_s = softmax_rows(mask_columns(affinity, lengths.masked ? lengths.text : 0));
  Var<Real> alpha_t =
      softmax_rows(mask_columns(transpose(affinity), lengths.masked ? lengths.speech : 0));

  Var<Real> att_s, att_t;
  if (config.coatt_mode == CoAttentionMode::context) {
    att_s = matmul(alpha_s, in.text);
    att_t = matmul(alpha_t, in.speech);
  } else {
    // gate_s[i] = mean_j alpha_t[j][i]: attention speech step i receives.
    Var<Real> gate_s = transpose(mean_rows(alpha_t));  // T x 1
    Var<Real> gate_t = transpose(mean_rows(alpha_s));
    att_s = mul(in.speech, matmul(gate_s, ones(g, 1, width)));
    att_t = mul(in.text, matmul(gate_t, ones(g, 1, width)));
  }

  if (ctx.trace) {
    ctx.trace->coatt_speech_hidden = hs.value();
    ctx.trace->coatt_text_hidden = ht.value();
    ctx.trace->affinity = affinity.value();
    ctx.trace->speech_attn = alpha_s.value();
    ctx.trace->text_attn = alpha_t.value();
    ctx.trace->speech_attended = att_s.value();
    ctx.trace->text_attended = att_t.value();
  }
  return {concat_cols(in.speech, att_s), concat_cols(in.text, att_t)};
}

template <class Real>
Var<Real> transformer_encode(Var<Real> x, const ParamSet<Real>& params, const std::string& prefix,
                             const MdatConfig& config, std::size_t valid,
                             ForwardContext<Real>& ctx) {
  Graph<Real>& g = *x.graph;
  const std::size_t d = x.cols();
  const std::size_t heads = config.n_heads;
  if (heads == 0 || d % heads != 0) {
    throw std::invalid_argument("transformer: width " + std::to_string(d) +
                                " is not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t dh = d / heads;
  auto p = [&](const char* name) { return g.parameter(params, prefix + "." + name); };
  const Real drop = static_cast<Real>(config.dropout_p);

  Var<Real> q = affine(x, p("W_q"), p("b_q"));
  Var<Real> k = matmul(x, p("W_k"));
  Var<Real> v = affine(x, p("W_v"), p("b_v"));
  const Real inv_sqrt = Real(1) / std::sqrt(static_cast<Real>(dh));

  Var<Real> merged;
  for (std::size_t h = 0; h < heads; ++h) {
    Var<Real> qh = slice_cols(q, h * dh, dh);
    Var<Real> kh = slice_cols(k, h * dh, dh);
    Var<Real> vh = slice_cols(v, h * dh, dh);
    Var<Real> scores = scale(matmul(qh, transpose(kh)), inv_sqrt);
    Var<Real> attn = softmax_rows(mask_columns(scores, valid));
    if (ctx.trace) ctx.trace->self_attn.push_back(attn.value());
    Var<Real> head = matmul(attn, vh);
    merged = h == 0 ? head : concat_cols(merged, head);
  }
  Var<Real> attn_out = dropout(affine(merged, p("W_o"), p("b_o")), drop, ctx.train, ctx.rng);
  const Real eps = static_cast<Real>(config.ln_eps);
  Var<Real> x1 = layer_norm(add(x, attn_out), p("ln1.gamma"), p("ln1.beta"), eps);
  Var<Real> hidden = relu(affine(x1, p("ff1.W"), p("ff1.b")));
  Var<Real> ff = dropout(affine(hidden, p("ff2.W"), p("ff2.b")), drop, ctx.train, ctx.rng);
  return layer_norm(add(x1, ff), p("ln2.gamma"), p("ln2.beta"), eps);
}

template <class Real>
Var<Real> classify_logits(ModalityPair<Real> enc, const ParamSet<Real>& params,
                          const ValidLengths& lengths) {
  if (enc.speech.cols() != enc.text.cols()) {
    throw numerics::ShapeError("classifier: modality widths differ");
  }
  Graph<Real>& g = *enc.speech.graph;
  Var<Real> pooled = concat_cols(pool(enc.speech, lengths.speech, lengths.masked),
                                 pool(enc.text, lengths.text, lengths.masked));
  return affine(pooled, g.parameter(params, "cls.W"), g.parameter(params, "cls.b"));
}

template <class Real>
Var<Real> classify(ModalityPair<Real> enc, const ParamSet<Real>& params,
                   const ValidLengths& lengths) {
  return softmax_rows(classify_logits(enc, params, lengths));
}

template <class Real>
Var<Real> mdat_logits(Graph<Real>& g, const ParamSet<Real>& params, const MdatConfig& config,
                      const ModelInput<Real>& input, ForwardContext<Real>& ctx) {
  if (input.speech.rows() != config.seq_len) {
    throw numerics::ShapeError("input length " + std::to_string(input.speech.rows()) +
                               " differs from configured length " +
                               std::to_string(config.seq_len));
  }
  const ValidLengths lengths{input.speech_valid, input.text_valid, config.mask_padding};
  ModalityPair<Real> x = project_inputs(g, params, config, input);
  if (config.use_graph) x = graph_attention(x, params, config, lengths, ctx);
  if (config.use_coatt) x = co_attention(x, params, config, lengths, ctx);
  if (config.use_transformer) {
    x.speech = transformer_encode(x.speech, params, "enc_s", config,
                                  lengths.masked ? lengths.speech : 0, ctx);
    x.text = transformer_encode(x.text, params, "enc_t", config,
                                lengths.masked ? lengths.text : 0, ctx);
  }
  return classify_logits(x, params, lengths);
}

template <class Real>
Tensor<Real> mdat_predict(const ParamSet<Real>& params, const MdatConfig& config,
                          const ModelInput<Real>& input, AttentionTrace<Real>* trace) {
  Graph<Real> g;
  ForwardContext<Real> ctx;
  ctx.trace = trace;
  return numerics::softmax_rows(mdat_logits(g, params, config, input, ctx).value());
}

#define MDAT_INSTANTIATE_MODEL(R)                                                               \
  template ModelInput<R> make_input<R>(const dataio::LoadedSample&);                            \
  template ModalityPair<R> project_inputs(Graph<R>&, const ParamSet<R>&, const MdatConfig&,     \
                                          const ModelInput<R>&);                                \
  template ModalityPair<R> graph_attention(ModalityPair<R>, const ParamSet<R>&,                 \
                                           const MdatConfig&, const ValidLengths&,              \
                                           ForwardContext<R>&);                                 \
  template ModalityPair<R> co_attention(ModalityPair<R>, const ParamSet<R>&, const MdatConfig&, \
                                        const ValidLengths&, ForwardContext<R>&);               \
  template Var<R> transformer_encode(Var<R>, const ParamSet<R>&, const std::string&,            \
                                     const MdatConfig&, std::size_t, ForwardContext<R>&);       \
  template Var<R> classify_logits(ModalityPair<R>, const ParamSet<R>&, const ValidLengths&);    \
  template Var<R> classify(ModalityPair<R>, const ParamSet<R>&, const ValidLengths&);           \
  template Var<R> mdat_logits(Graph<R>&, const ParamSet<R>&, const MdatConfig&,                 \
                              const ModelInput<R>&, ForwardContext<R>&);                        \
  template Tensor<R> mdat_predict(const ParamSet<R>&, const MdatConfig&, const ModelInput<R>&,  \
                                  AttentionTrace<R>*);

MDAT_INSTANTIATE_MODEL(float)
MDAT_INSTANTIATE_MODEL(double)
MDAT_INSTANTIATE_MODEL(long double)

#undef MDAT_INSTANTIATE_MODEL

}  // namespace mdat::model
