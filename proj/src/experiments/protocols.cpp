#include "mdat/experiments/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include "mdat/experiments/parallel.hpp"

namespace mdat::experiments {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

nlohmann::json settings_json(const TrainConfig& tc, const std::vector<NamedModel>& models) {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& nm : models) m.push_back({{"name", nm.name}, {"model", config_to_json(nm.config)}});
  return {{"train", tc}, {"models", m}};
}

RunRecord make_record(nlohmann::json labels, std::uint64_t seed, std::vector<EpochRecord> history,
                      MetricsReport metrics) {
  return {std::move(labels), seed, std::move(history), std::move(metrics)};
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

}  // namespace

std::string format_ua(double ua) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", ua);
  return buf;
}

std::string Table::to_csv() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_field(cells[i]);
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

void to_json(nlohmann::json& j, const RunRecord& r) {
  j = nlohmann::json{{"labels", r.labels}, {"seed", r.seed}, {"history", r.history}, {"metrics", r.metrics}};
}

nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json grads = nlohmann::json::array();
  for (const auto& c : report.gradient_checks) {
    grads.push_back({{"name", c.name}, {"err64", c.err64}, {"err32", c.err32},
                     {"worst_tensor", c.worst_tensor}, {"entry64", c.entry64}, {"entry32", c.entry32},
                     {"entries", c.entries}, {"kinks_skipped", c.kinks_skipped}, {"pass", passes(c)}});
  }
  nlohmann::json j{{"protocol", report.protocol},
                   {"settings", report.settings},
                   {"runs", report.runs},
                   {"table", {{"header", report.table.header}, {"rows", report.table.rows}}}};
  if (!report.gradient_checks.empty()) j["gradient_checks"] = grads;
  return j;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
    if (!f) throw std::runtime_error("failed writing " + p.string());
  };
  write(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
  write(out_dir / "table.csv", report.table.to_csv());
}

KShotPools make_kshot_pools(const dataio::Dataset& target, std::size_t k_max, std::uint64_t seed) {
  const std::size_t n_classes = target.vocab.size();
  std::vector<std::vector<std::size_t>> by_class(n_classes);
  for (std::size_t i = 0; i < target.size(); ++i) by_class.at(target.samples[i].label).push_back(i);

  std::seed_seq seq{seed, std::uint64_t{3}};
  std::mt19937_64 rng(seq);
  KShotPools pools;
  pools.reserve.resize(n_classes);
  std::vector<bool> reserved(target.size(), false);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (by_class[c].size() < k_max) {
      throw std::invalid_argument("class '" + target.vocab.name(c) + "' has " +
                                  std::to_string(by_class[c].size()) + " samples, fewer than k=" +
                                  std::to_string(k_max));
    }
    std::shuffle(by_class[c].begin(), by_class[c].end(), rng);
    pools.reserve[c].assign(by_class[c].begin(), by_class[c].begin() + std::ptrdiff_t(k_max));
    for (std::size_t i : pools.reserve[c]) reserved[i] = true;
  }
  for (std::size_t i = 0; i < target.size(); ++i)
    if (!reserved[i]) pools.eval.push_back(i);
  if (pools.eval.empty()) throw std::invalid_argument("no target samples left for evaluation");
  return pools;
}

std::vector<std::size_t> kshot_selection(const KShotPools& pools, std::size_t k) {
  std::vector<std::size_t> out;
  for (const auto& r : pools.reserve) {
    if (k > r.size()) throw std::invalid_argument("k exceeds the reserved pool");
    out.insert(out.end(), r.begin(), r.begin() + std::ptrdiff_t(k));
  }
  return out;
}

TrainResult kshot_adapt(const ParamSet<float>& source, const ModelConfig& config,
                        const dataio::Dataset& target, const std::vector<std::size_t>& selection,
                        const TrainConfig& tc) {
  if (selection.empty() || tc.finetune_epochs == 0) return {source, {}};
  return train(config, dataio::subset(target, selection), tc, source, tc.finetune_epochs);
}

ExperimentReport run_within(const std::vector<NamedDataset>& datasets,
                            const std::vector<NamedModel>& models, const TrainConfig& tc,
                            double train_fraction, std::size_t jobs) {
  ExperimentReport report;
  report.protocol = "within";
  report.settings = settings_json(tc, models);
  report.settings["train_fraction"] = train_fraction;
  report.table.header = {"dataset", "model", "ua", "n_test"};

  const std::size_t n = datasets.size() * models.size();
  std::vector<RunRecord> runs(n);
  parallel_for(n, jobs, [&](std::size_t cell) {
    const auto& ds = datasets[cell / models.size()];
    const auto& nm = models[cell % models.size()];
    const auto [train_idx, test_idx] = dataio::split_indices(ds.data.labels(), train_fraction, tc.seed);
    auto result = train(nm.config, dataio::subset(ds.data, train_idx), tc);
    runs[cell] = make_record({{"dataset", ds.name}, {"model", nm.name}}, tc.seed,
                             std::move(result.history),
                             evaluate(result.params, nm.config, dataio::subset(ds.data, test_idx)));
  });
  for (auto& r : runs) {
    report.table.rows.push_back({r.labels["dataset"], r.labels["model"], format_ua(r.metrics.ua),
                                 std::to_string(r.metrics.count)});
  }
  report.runs = std::move(runs);
  return report;
}

ExperimentReport run_cross_language(const NamedDataset& source,
                                    const std::vector<NamedDataset>& targets,
                                    const std::vector<NamedModel>& models, const TrainConfig& tc,
                                    std::size_t jobs) {
  ExperimentReport report;
  report.protocol = "cross";
  report.settings = settings_json(tc, models);
  report.settings["source"] = source.name;
  report.table.header = {"source", "target", "model", "ua", "n_test"};

  std::vector<std::vector<RunRecord>> per_model(models.size());
  parallel_for(models.size(), jobs, [&](std::size_t m) {
    auto result = train(models[m].config, source.data, tc);
    for (const auto& t : targets) {
      per_model[m].push_back(make_record(
          {{"source", source.name}, {"target", t.name}, {"model", models[m].name}}, tc.seed,
          result.history, evaluate(result.params, models[m].config, t.data)));
    }
  });
  for (std::size_t ti = 0; ti < targets.size(); ++ti)
    for (std::size_t m = 0; m < models.size(); ++m) {
      auto& r = per_model[m][ti];
      report.table.rows.push_back({source.name, targets[ti].name, models[m].name,
                                   format_ua(r.metrics.ua), std::to_string(r.metrics.count)});
      report.runs.push_back(std::move(r));
    }
  return report;
}

ExperimentReport run_kshot(const NamedDataset& source, const std::vector<NamedDataset>& targets,
                           const std::vector<NamedModel>& models, const TrainConfig& tc,
                           const std::vector<std::size_t>& ks, std::size_t n_seeds,
                           std::size_t jobs) {
  if (ks.empty()) throw std::invalid_argument("k-shot needs at least one k");
  if (n_seeds == 0) throw std::invalid_argument("k-shot needs at least one seed");
  const std::size_t k_max = *std::max_element(ks.begin(), ks.end());

  ExperimentReport report;
  report.protocol = "kshot";
  report.settings = settings_json(tc, models);
  report.settings["source"] = source.name;
  report.settings["k"] = ks;
  report.settings["seeds"] = n_seeds;
  report.table.header = {"source", "target", "model", "k", "seeds", "mean_ua", "std_ua"};

  // cell = (seed, model); inside: every target and k
  const std::size_t n_cells = n_seeds * models.size();
  std::vector<std::vector<RunRecord>> cells(n_cells);
  parallel_for(n_cells, jobs, [&](std::size_t cell) {
    const std::size_t s = cell / models.size();
    const auto& nm = models[cell % models.size()];
    TrainConfig seeded = tc;
    seeded.seed = tc.seed + s;
    const auto src = train(nm.config, source.data, seeded);
    for (const auto& t : targets) {
      const auto pools = make_kshot_pools(t.data, k_max, seeded.seed);
      const auto eval_set = dataio::subset(t.data, pools.eval);
      const std::set<std::size_t> eval_ids(pools.eval.begin(), pools.eval.end());
      for (std::size_t k : ks) {
        const auto selection = kshot_selection(pools, k);
        for (std::size_t i : selection) {
          if (eval_ids.count(i)) throw std::logic_error("k-shot sample leaked into evaluation pool");
        }
        auto adapted = kshot_adapt(src.params, nm.config, t.data, selection, seeded);
        cells[cell].push_back(make_record({{"source", source.name}, {"target", t.name},
                                           {"model", nm.name}, {"k", k}},
                                          seeded.seed, std::move(adapted.history),
                                          evaluate(adapted.params, nm.config, eval_set)));
      }
    }
  });

  for (std::size_t ti = 0; ti < targets.size(); ++ti)
    for (std::size_t m = 0; m < models.size(); ++m)
      for (std::size_t ki = 0; ki < ks.size(); ++ki) {
        std::vector<double> uas;
        for (std::size_t s = 0; s < n_seeds; ++s)
          uas.push_back(cells[s * models.size() + m][ti * ks.size() + ki].metrics.ua);
        report.table.rows.push_back({source.name, targets[ti].name, models[m].name,
                                     std::to_string(ks[ki]), std::to_string(n_seeds),
                                     format_ua(mean(uas)), format_ua(stddev(uas))});
      }
  for (auto& c : cells)
    for (auto& r : c) report.runs.push_back(std::move(r));
  return report;
}

ExperimentReport run_ablation(const NamedDataset& source, const std::vector<NamedDataset>& targets,
                              const model::MdatConfig& base, const TrainConfig& tc,
                              const AblationOptions& options, std::size_t jobs) {
  ExperimentReport report;
  report.protocol = "ablation";
  if (options.gradcheck) {
    report.gradient_checks = ablation_gradient_checks(base, tc.seed, jobs);
    for (const auto& c : report.gradient_checks) {
      if (!passes(c)) {
        throw std::runtime_error("gradient check failed for " + c.name + " (64-bit " +
                                 std::to_string(c.err64) + ", 32-bit " + std::to_string(c.err32) + ")");
      }
    }
  }

  std::vector<NamedModel> models;
  for (const auto& flags : model::ablation_grid()) {
    models.push_back({"model" + std::to_string(flags.model), model::ablation_config(base, flags.model)});
  }
  report.settings = settings_json(tc, models);
  report.settings["source"] = source.name;
  report.table.header = {"model", "graph", "co_attention", "transformer"};
  if (targets.empty()) {
    report.settings["train_fraction"] = options.train_fraction;
    report.table.header.push_back(source.name);
  }
  for (const auto& t : targets) report.table.header.push_back(t.name);

  std::vector<std::vector<RunRecord>> per_model(models.size());
  parallel_for(models.size(), jobs, [&](std::size_t m) {
    const auto& nm = models[m];
    if (targets.empty()) {
      const auto [train_idx, test_idx] =
          dataio::split_indices(source.data.labels(), options.train_fraction, tc.seed);
      auto result = train(nm.config, dataio::subset(source.data, train_idx), tc);
      per_model[m].push_back(make_record({{"source", source.name}, {"target", source.name},
                                          {"model", nm.name}},
                                         tc.seed, std::move(result.history),
                                         evaluate(result.params, nm.config,
                                                  dataio::subset(source.data, test_idx))));
      return;
    }
    auto result = train(nm.config, source.data, tc);
    for (const auto& t : targets) {
      per_model[m].push_back(make_record({{"source", source.name}, {"target", t.name}, {"model", nm.name}},
                                         tc.seed, result.history,
                                         evaluate(result.params, nm.config, t.data)));
    }
  });

  auto mark = [](bool on) { return std::string(on ? "yes" : "no"); };
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& flags = model::ablation_grid()[m];
    std::vector<std::string> row{std::to_string(flags.model), mark(flags.graph), mark(flags.coatt),
                                 mark(flags.transformer)};
    for (auto& r : per_model[m]) {
      row.push_back(format_ua(r.metrics.ua));
      report.runs.push_back(std::move(r));
    }
    report.table.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace mdat::experiments
