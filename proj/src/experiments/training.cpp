#include "mdat/experiments/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mdat::experiments {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("Adam epsilon must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"beta1", c.beta1},
                     {"beta2", c.beta2},
                     {"adam_eps", c.adam_eps},
                     {"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"finetune_epochs", c.finetune_epochs},
                     {"seed", c.seed},
                     {"dropout", c.dropout},
                     {"track_train_ua", c.track_train_ua}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig out = c;
  for (const auto& [key, value] : j.items()) {
    if (key == "lr") out.lr = value.get<double>();
    else if (key == "beta1") out.beta1 = value.get<double>();
    else if (key == "beta2") out.beta2 = value.get<double>();
    else if (key == "adam_eps") out.adam_eps = value.get<double>();
    else if (key == "batch_size") out.batch_size = value.get<std::size_t>();
    else if (key == "epochs") out.epochs = value.get<std::size_t>();
    else if (key == "finetune_epochs") out.finetune_epochs = value.get<std::size_t>();
    else if (key == "seed") out.seed = value.get<std::uint64_t>();
    else if (key == "dropout") out.dropout = value.get<bool>();
    else if (key == "track_train_ua") out.track_train_ua = value.get<bool>();
    else throw std::invalid_argument("unknown train config key '" + key + "'");
  }
  c = out;
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = nlohmann::json{{"epoch", r.epoch}, {"loss", r.loss}, {"train_ua", r.train_ua}};
}

Adam::Adam(const ParamSet<float>& like, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& [_, t] : like) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void Adam::step(ParamSet<float>& params, const ParamSet<float>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("Adam: parameter set changed shape");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, double(t_));
  const double c2 = 1.0 - std::pow(beta2_, double(t_));
  auto& entries = params.entries();
  const auto& g_entries = grads.entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto w = entries[p].second.data();
    auto g = g_entries[p].second.data();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * gi;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * gi * gi;
      const double update = lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
      w[i] = static_cast<float>(double(w[i]) - update);
    }
  }
}

namespace {

std::vector<model::ModelInput<float>> inputs_of(const dataio::Dataset& data) {
  std::vector<model::ModelInput<float>> out;
  out.reserve(data.size());
  for (const auto& s : data.samples) out.push_back(model::make_input<float>(s));
  return out;
}

std::size_t argmax(const Tensor<float>& probs) {
  const auto d = probs.data();
  return static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
}

MetricsReport evaluate_inputs(const ParamSet<float>& params, const ModelConfig& config,
                              const std::vector<model::ModelInput<float>>& inputs,
                              const std::vector<std::size_t>& labels, std::size_t n_classes) {
  ConfusionMatrix m(n_classes);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Graph<float> g;
    model::ForwardContext<float> ctx;
    m.add(labels[i], argmax(model_logits(g, params, config, inputs[i], ctx).value()));
  }
  return make_report(m);
}

}  // namespace

TrainResult train(const ModelConfig& config, const dataio::Dataset& data, const TrainConfig& tc,
                  const std::optional<ParamSet<float>>& initial, std::optional<std::size_t> epochs,
                  const EpochCallback& on_epoch) {
  tc.validate();
  validate(config);
  check_compatible(config, data);
  if (data.size() == 0) throw std::invalid_argument("cannot train on an empty dataset");

  TrainResult result;
  if (initial) {
    model::check_params(*initial, param_specs(config));
    result.params = *initial;
  } else {
    result.params = init_params(config, tc.seed);
  }
  const std::size_t n_epochs = epochs.value_or(tc.epochs);
  if (n_epochs == 0) return result;

  const auto inputs = inputs_of(data);
  const auto labels = data.labels();
  std::seed_seq shuffle_seq{tc.seed, std::uint64_t{1}};
  std::seed_seq dropout_seq{tc.seed, std::uint64_t{2}};
  std::mt19937_64 shuffle_rng(shuffle_seq);
  std::mt19937_64 dropout_rng(dropout_seq);
  const bool use_dropout = tc.dropout && dropout_p(config) > 0.0;

  Adam adam(result.params, tc.lr, tc.beta1, tc.beta2, tc.adam_eps);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= n_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      Graph<float> g;
      model::ForwardContext<float> ctx{use_dropout, &dropout_rng, nullptr};
      std::optional<Var<float>> total;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t i = order[b];
        Var<float> ce = cross_entropy(model_logits(g, result.params, config, inputs[i], ctx), labels[i]);
        total = total ? add(*total, ce) : ce;
      }
      Var<float> loss = scale(*total, 1.0f / float(end - start));
      if (auto penalty = model_penalty(g, result.params, config)) loss = add(loss, *penalty);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw DivergenceError(epoch, "training diverged at epoch " + std::to_string(epoch));
      }
      g.backward(loss);
      adam.step(result.params, g.gradients(result.params));
      if (!result.params.all_finite()) {
        throw DivergenceError(epoch, "parameters became non-finite at epoch " + std::to_string(epoch));
      }
      loss_sum += value;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / double(batches);
    if (tc.track_train_ua) {
      rec.train_ua = evaluate_inputs(result.params, config, inputs, labels, n_classes(config)).ua;
    }
    result.history.push_back(rec);
    if (on_epoch && !on_epoch(rec)) break;
  }
  return result;
}

Tensor<float> predict(const ParamSet<float>& params, const ModelConfig& config,
                      const dataio::LoadedSample& sample) {
  Graph<float> g;
  model::ForwardContext<float> ctx;
  return numerics::softmax_rows(
      model_logits(g, params, config, model::make_input<float>(sample), ctx).value());
}

MetricsReport evaluate(const ParamSet<float>& params, const ModelConfig& config,
                       const dataio::Dataset& data) {
  check_compatible(config, data);
  if (data.size() == 0) throw std::invalid_argument("cannot evaluate on an empty dataset");
  return evaluate_inputs(params, config, inputs_of(data), data.labels(), n_classes(config));
}

}  // namespace mdat::experiments
