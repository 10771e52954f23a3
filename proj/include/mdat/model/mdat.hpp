#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdat/dataio/dataset.hpp"
#include "mdat/model/param_init.hpp"
#include "mdat/numerics/graph.hpp"
#include "mdat/numerics/param_set.hpp"

namespace mdat::model {

using numerics::Graph;
using numerics::ParamSet;
using numerics::Tensor;
using numerics::Var;

/// How co-attention weights turn into attended features.
///   context: x'_s = alpha_s * in_t (each speech step gathers text context).
///   gate:    x'_s = in_s scaled per row by the mean attention that speech
///            step receives from the text side (element-wise reading).
enum class CoAttentionMode { context, gate };

const char* to_string(CoAttentionMode mode);
CoAttentionMode coattention_mode_from_string(const std::string& s);

struct MdatConfig {
  std::size_t d_model = 1024;    // speech width D_s; shared width after projection
  std::size_t d_text = 768;      // raw text width D_t
  std::size_t graph_width = 0;   // U; 0 means d_model
  std::size_t seq_len = 128;     // aligned length T for both modalities
  std::size_t n_heads = 4;
  std::size_t d_ff = 0;          // 0 means 4 * encoder_width()
  std::size_t n_classes = 4;
  double leaky_slope = 0.2;
  double dropout_p = 0.1;
  double ln_eps = 1e-5;
  CoAttentionMode coatt_mode = CoAttentionMode::context;
  bool use_graph = true;
  bool use_coatt = true;
  bool use_transformer = true;
  bool mask_padding = false;

  std::size_t graph_out() const { return graph_width ? graph_width : d_model; }
  /// Width of the streams entering co-attention.
  std::size_t fused_width() const { return use_graph ? graph_out() : d_model; }
  /// Width entering the transformer encoders and the classifier pooling.
  std::size_t encoder_width() const { return use_coatt ? 2 * fused_width() : fused_width(); }
  std::size_t ff_width() const { return d_ff ? d_ff : 4 * encoder_width(); }

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;

  friend bool operator==(const MdatConfig&, const MdatConfig&) = default;
};

void to_json(nlohmann::json& j, const MdatConfig& c);
void from_json(const nlohmann::json& j, MdatConfig& c);

/// Module switches of one ablation configuration.
struct AblationFlags {
  int model = 0;  // 1..7
  bool graph = false;
  bool coatt = false;
  bool transformer = false;
};

/// The seven module combinations, Model 1 (all modules) through Model 7.
const std::array<AblationFlags, 7>& ablation_grid();

/// `base` with the switches of ablation model `index` (1..7).
MdatConfig ablation_config(const MdatConfig& base, int index);

/// Intermediates captured when a trace is attached to the forward context.
template <class Real>
struct AttentionTrace {
  // graph attention
  Tensor<Real> nodes;       // Z, 2T x D
  Tensor<Real> projected;   // H, 2T x U
  Tensor<Real> scores;      // A after LeakyReLU, 2T x 2T
  Tensor<Real> graph_attn;  // alpha, 2T x 2T
  // co-attention
  Tensor<Real> coatt_speech_hidden;  // H_s
  Tensor<Real> coatt_text_hidden;    // H_t
  Tensor<Real> affinity;             // C = H_s H_t^T, T x T
  Tensor<Real> speech_attn;          // alpha_s
  Tensor<Real> text_attn;            // alpha_t
  Tensor<Real> speech_attended;      // x'_s
  Tensor<Real> text_attended;        // x'_t
  // one entry per head, speech encoder first then text encoder
  std::vector<Tensor<Real>> self_attn;
};

template <class Real>
struct ForwardContext {
  bool train = false;
  std::mt19937_64* rng = nullptr;
  AttentionTrace<Real>* trace = nullptr;
};

/// Both modalities of one utterance, already aligned to the same length.
template <class Real>
struct ModelInput {
  Tensor<Real> speech;  // T x D_s
  Tensor<Real> text;    // T x D_t
  std::size_t speech_valid = 0;
  std::size_t text_valid = 0;
};

template <class Real>
ModelInput<Real> make_input(const dataio::LoadedSample& sample);

template <class Real>
struct ModalityPair {
  Var<Real> speech;
  Var<Real> text;
};

/// Valid (non-padded) lengths, consulted only when masking is enabled.
struct ValidLengths {
  std::size_t speech = 0;
  std::size_t text = 0;
  bool masked = false;
};

/// Fresh parameters for `config`: Glorot-uniform weights, zero biases and
/// layer-norm shifts, unit layer-norm gains. Only modules enabled in the
/// config receive parameters.
ParamSet<float> init_mdat_params(const MdatConfig& config, std::uint64_t seed);

/// Kernel-1 convolution of the text stream to the speech width; speech
/// passes through unchanged.
template <class Real>
ModalityPair<Real> project_inputs(Graph<Real>& g, const ParamSet<Real>& params,
                                  const MdatConfig& config, const ModelInput<Real>& input);

/// One graph-attention layer over the joint complete graph of 2T nodes
/// (speech steps then text steps, with self-loops), split back per modality.
template <class Real>
ModalityPair<Real> graph_attention(ModalityPair<Real> in, const ParamSet<Real>& params,
                                   const MdatConfig& config, const ValidLengths& lengths,
                                   ForwardContext<Real>& ctx);

/// Co-attention between the two streams; each output is the feature-axis
/// concatenation [input, attended].
template <class Real>
ModalityPair<Real> co_attention(ModalityPair<Real> in, const ParamSet<Real>& params,
                                const MdatConfig& config, const ValidLengths& lengths,
                                ForwardContext<Real>& ctx);

/// One post-norm transformer encoder layer. `prefix` selects the modality's
/// parameters ("enc_s" or "enc_t"). Keys at positions >= `valid` are masked;
/// 0 disables masking.
template <class Real>
Var<Real> transformer_encode(Var<Real> x, const ParamSet<Real>& params, const std::string& prefix,
                             const MdatConfig& config, std::size_t valid,
                             ForwardContext<Real>& ctx);

/// Mean-pools each stream over time, concatenates, applies the dense layer.
template <class Real>
Var<Real> classify_logits(ModalityPair<Real> enc, const ParamSet<Real>& params,
                          const ValidLengths& lengths);

template <class Real>
Var<Real> classify(ModalityPair<Real> enc, const ParamSet<Real>& params,
                   const ValidLengths& lengths);

/// The full pipeline for the active module switches, returning 1 x C logits.
template <class Real>
Var<Real> mdat_logits(Graph<Real>& g, const ParamSet<Real>& params, const MdatConfig& config,
                      const ModelInput<Real>& input, ForwardContext<Real>& ctx);

/// Evaluation-mode class probabilities.
template <class Real>
Tensor<Real> mdat_predict(const ParamSet<Real>& params, const MdatConfig& config,
                          const ModelInput<Real>& input, AttentionTrace<Real>* trace = nullptr);

/// Names, shapes and initializers `config` expects.
std::vector<ParamSpec> mdat_param_specs(const MdatConfig& config);

}  // namespace mdat::model
