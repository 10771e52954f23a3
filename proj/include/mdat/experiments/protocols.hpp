#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mdat/experiments/gradient_suite.hpp"
#include "mdat/experiments/metrics.hpp"
#include "mdat/experiments/training.hpp"

namespace mdat::experiments {

struct NamedDataset {
  std::string name;
  dataio::Dataset data;
};

struct NamedModel {
  std::string name;
  ModelConfig config;
};

/// Rows of strings ready for CSV output.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
};

/// One training/evaluation cell of an experiment.
struct RunRecord {
  nlohmann::json labels;  // e.g. {"source": ..., "target": ..., "model": ..., "k": ...}
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
  MetricsReport metrics;
};

void to_json(nlohmann::json& j, const RunRecord& r);

struct ExperimentReport {
  std::string protocol;
  nlohmann::json settings;
  std::vector<RunRecord> runs;
  std::vector<GradientCase> gradient_checks;
  Table table;
};

nlohmann::json report_to_json(const ExperimentReport& report);

/// Writes report.json and table.csv into `out_dir` (created if needed).
void write_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

/// Reserved few-shot pools for one target corpus. For each class the first
/// k samples of `reserve[c]` form the k-shot selection, so selections for
/// growing k are nested. `eval` holds every sample never reserved.
struct KShotPools {
  std::vector<std::vector<std::size_t>> reserve;
  std::vector<std::size_t> eval;
};

/// Reserves `k_max` samples per class, chosen by a seeded shuffle. Throws
/// std::invalid_argument when a class has fewer than `k_max` samples or no
/// sample would remain for evaluation.
KShotPools make_kshot_pools(const dataio::Dataset& target, std::size_t k_max, std::uint64_t seed);

/// The first k reserved samples of each class, class by class.
std::vector<std::size_t> kshot_selection(const KShotPools& pools, std::size_t k);

/// Source parameters fine-tuned on `selection` of `target` for
/// tc.finetune_epochs; an empty selection returns `source` unchanged.
TrainResult kshot_adapt(const ParamSet<float>& source, const ModelConfig& config,
                        const dataio::Dataset& target, const std::vector<std::size_t>& selection,
                        const TrainConfig& tc);

/// Stratified train/test split of each dataset, one run per model.
ExperimentReport run_within(const std::vector<NamedDataset>& datasets,
                            const std::vector<NamedModel>& models, const TrainConfig& tc,
                            double train_fraction = 0.8, std::size_t jobs = 1);

/// Train on all of `source`, evaluate on all of each target.
ExperimentReport run_cross_language(const NamedDataset& source,
                                    const std::vector<NamedDataset>& targets,
                                    const std::vector<NamedModel>& models, const TrainConfig& tc,
                                    std::size_t jobs = 1);

/// For seeds tc.seed .. tc.seed + n_seeds - 1: train on the source, then for
/// each target and k, adapt on k samples per class and evaluate on the
/// target's unreserved samples. One table row per (target, model, k) with
/// the mean over seeds.
ExperimentReport run_kshot(const NamedDataset& source, const std::vector<NamedDataset>& targets,
                           const std::vector<NamedModel>& models, const TrainConfig& tc,
                           const std::vector<std::size_t>& ks, std::size_t n_seeds,
                           std::size_t jobs = 1);

struct AblationOptions {
  bool gradcheck = true;  // run the gradient suite on all seven first
  double train_fraction = 0.8;
};

/// Models 1-7 of `base`. Without targets each model is trained and scored on
/// a stratified split of `source`; otherwise it is trained on all of `source`
/// and scored on each target. Throws std::runtime_error if a gradient check
/// fails.
ExperimentReport run_ablation(const NamedDataset& source, const std::vector<NamedDataset>& targets,
                              const model::MdatConfig& base, const TrainConfig& tc,
                              const AblationOptions& options = {}, std::size_t jobs = 1);

std::string format_ua(double ua);

}  // namespace mdat::experiments
