#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "mdat/dataio/dataset.hpp"
#include "mdat/experiments/metrics.hpp"
#include "mdat/experiments/model_config.hpp"

namespace mdat::experiments {

struct TrainConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 16;
  std::size_t epochs = 50;
  std::size_t finetune_epochs = 20;
  std::uint64_t seed = 1;
  bool dropout = true;
  /// Evaluate train UA (eval mode) after every epoch.
  bool track_train_ua = true;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean training loss over the epoch's batches
  double train_ua = 0.0;  // NaN-free; 0 when not tracked
};

void to_json(nlohmann::json& j, const EpochRecord& r);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Adam with bias correction over every entry of a ParamSet.
class Adam {
 public:
  Adam(const ParamSet<float>& like, double lr, double beta1, double beta2, double eps);
  void step(ParamSet<float>& params, const ParamSet<float>& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct TrainResult {
  ParamSet<float> params;
  std::vector<EpochRecord> history;
};

/// Called after every epoch; returning false stops training early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Mini-batch Adam on mean cross-entropy (plus the model's penalty). Starts
/// from `initial` when given, otherwise from a fresh seeded initialization.
/// `epochs` overrides the config's epoch count. Throws DivergenceError on a
/// non-finite loss.
TrainResult train(const ModelConfig& config, const dataio::Dataset& data, const TrainConfig& tc,
                  const std::optional<ParamSet<float>>& initial = std::nullopt,
                  std::optional<std::size_t> epochs = std::nullopt,
                  const EpochCallback& on_epoch = {});

/// Eval-mode class probabilities for one sample.
Tensor<float> predict(const ParamSet<float>& params, const ModelConfig& config,
                      const dataio::LoadedSample& sample);

/// Argmax prediction for every sample (dropout off).
MetricsReport evaluate(const ParamSet<float>& params, const ModelConfig& config,
                       const dataio::Dataset& data);

}  // namespace mdat::experiments
