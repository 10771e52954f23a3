#include "mdat/cli/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>

#include "CLI11.hpp"
#include "mdat/cli/settings.hpp"
#include "mdat/experiments/protocols.hpp"

namespace mdat::cli {

namespace {

namespace fs = std::filesystem;
using experiments::ExperimentReport;
using experiments::NamedDataset;
using experiments::NamedModel;

// Flag values for one subcommand; `given` tells set flags from defaults.
struct Flags {
  std::string config, out, vocab, coatt_mode, checkpoint;
  std::uint64_t seed = 1;
  std::size_t epochs = 0, finetune_epochs = 0, batch_size = 0, length = 0, jobs = 1, seeds = 0;
  std::size_t heads = 0, d_ff = 0, graph_width = 0, hidden = 0, head_width = 0;
  double lr = 0, dropout_p = 0, l2 = 0, train_fraction = 0;
  std::vector<std::string> models, sources, targets;
  std::vector<std::size_t> ks;
  bool no_dropout = false, mask_padding = false, no_gradcheck = false;
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

template <class T>
CLI::Option* option(CLI::App* app, Flags& f, const std::string& name, T& target, const std::string& help) {
  return f.opts[name] = app->add_option("--" + name, target, help);
}

CLI::Option* flag(CLI::App* app, Flags& f, const std::string& name, bool& target, const std::string& help) {
  return f.opts[name] = app->add_flag("--" + name, target, help);
}

void add_train_flags(CLI::App* app, Flags& f) {
  option(app, f, "config", f.config, "JSON config file (sections model, train, data, experiment)")
      ->check(CLI::ExistingFile);
  option(app, f, "seed", f.seed, "seed for initialization, shuffling, dropout and splits");
  option(app, f, "epochs", f.epochs, "training epochs");
  option(app, f, "lr", f.lr, "Adam learning rate");
  option(app, f, "batch-size", f.batch_size, "mini-batch size");
  flag(app, f, "no-dropout", f.no_dropout, "disable dropout during training");
  option(app, f, "length", f.length, "aligned sequence length T (default: longest input)");
  option(app, f, "vocab", f.vocab, "label vocabulary: basic4, emodb7, emovo6 or generic:N");
  option(app, f, "heads", f.heads, "MDAT attention heads");
  option(app, f, "d-ff", f.d_ff, "MDAT feed-forward width");
  option(app, f, "graph-width", f.graph_width, "MDAT graph attention width U");
  option(app, f, "coatt-mode", f.coatt_mode, "co-attention reading: context or gate")
      ->check(CLI::IsMember({"context", "gate"}));
  flag(app, f, "mask-padding", f.mask_padding, "mask padded steps in attention and pooling");
  option(app, f, "dropout-p", f.dropout_p, "dropout probability");
  option(app, f, "hidden", f.hidden, "baseline LSTM hidden size");
  option(app, f, "head-width", f.head_width, "baseline dense layer width");
  option(app, f, "l2", f.l2, "baseline L2 penalty on the dense layer");
  option(app, f, "out", f.out, "directory for report.json and table.csv");
}

void add_model_list(CLI::App* app, Flags& f) {
  f.opts["model"] = app->add_option("--model", f.models, "model kinds: mdat, baseline")
                        ->delimiter(',')
                        ->check(CLI::IsMember({"mdat", "baseline"}));
}

void add_jobs(CLI::App* app, Flags& f) {
  option(app, f, "jobs", f.jobs, "parallel workers for independent cells")->check(CLI::PositiveNumber);
}

Settings resolve(const Flags& f) {
  Settings s;
  if (!f.config.empty()) s = load_settings(f.config);
  auto& t = s.train;
  if (f.given("seed")) t.seed = f.seed;
  if (f.given("epochs")) t.epochs = f.epochs;
  if (f.given("finetune-epochs")) t.finetune_epochs = f.finetune_epochs;
  if (f.given("lr")) t.lr = f.lr;
  if (f.given("batch-size")) t.batch_size = f.batch_size;
  if (f.given("no-dropout")) t.dropout = !f.no_dropout;
  t.validate();

  if (f.given("length")) s.data.length = f.length;
  if (f.given("vocab")) s.data.vocabulary = f.vocab;
  if (f.given("data")) s.data.sources = f.sources;
  if (f.given("source")) s.data.sources = f.sources;
  if (f.given("target")) s.data.targets = f.targets;

  auto& m = s.model;
  if (f.given("model")) m.kinds = f.models;
  if (f.given("heads")) m.mdat["n_heads"] = f.heads;
  if (f.given("d-ff")) m.mdat["d_ff"] = f.d_ff;
  if (f.given("graph-width")) m.mdat["graph_width"] = f.graph_width;
  if (f.given("coatt-mode")) m.mdat["coatt_mode"] = f.coatt_mode;
  if (f.given("mask-padding")) m.mdat["mask_padding"] = f.mask_padding;
  if (f.given("dropout-p")) m.mdat["dropout_p"] = m.baseline["dropout_p"] = f.dropout_p;
  if (f.given("hidden")) m.baseline["hidden"] = f.hidden;
  if (f.given("head-width")) m.baseline["head_width"] = f.head_width;
  if (f.given("l2")) m.baseline["l2"] = f.l2;

  auto& e = s.experiment;
  if (f.given("k")) e.k = f.ks;
  if (f.given("seeds")) e.seeds = f.seeds;
  if (f.given("train-fraction")) e.train_fraction = f.train_fraction;
  if (f.given("no-gradcheck")) e.gradcheck = !f.no_gradcheck;
  return s;
}

// "name=path" or a bare path; a bare path is named after its manifest
// directory (or file stem when the file is not called manifest.jsonl).
std::pair<std::string, fs::path> parse_input(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq != std::string::npos && eq > 0) return {spec.substr(0, eq), spec.substr(eq + 1)};
  fs::path p = spec;
  if (p.filename() == "manifest.jsonl" && p.has_parent_path()) {
    auto dir = fs::absolute(p).parent_path().filename().string();
    if (!dir.empty()) return {dir, p};
  }
  return {p.stem().string(), p};
}

struct Inputs {
  dataio::LabelVocabulary vocab;
  std::size_t length = 0;
  std::vector<NamedDataset> sources;
  std::vector<NamedDataset> targets;
};

Inputs load_inputs(const Settings& s) {
  Inputs in;
  in.vocab = dataio::vocabulary_by_name(s.data.vocabulary);
  std::vector<std::pair<std::string, std::vector<dataio::Sample>>> src, tgt;
  std::size_t longest = 0;
  auto read = [&](const std::string& spec, auto& dest) {
    auto [name, path] = parse_input(spec);
    auto samples = dataio::load_manifest(path, in.vocab);
    if (samples.empty()) throw std::invalid_argument("manifest " + path.string() + " has no samples");
    for (const auto& smp : samples) {
      longest = std::max<std::size_t>(longest, dataio::inspect_feature_file(smp.speech_features).rows);
      longest = std::max<std::size_t>(longest, dataio::inspect_feature_file(smp.text_features).rows);
    }
    dest.emplace_back(name, std::move(samples));
  };
  for (const auto& spec : s.data.sources) read(spec, src);
  for (const auto& spec : s.data.targets) read(spec, tgt);
  in.length = s.data.length.value_or(longest);
  for (auto& [name, samples] : src) in.sources.push_back({name, dataio::load_dataset(samples, in.vocab, in.length)});
  for (auto& [name, samples] : tgt) in.targets.push_back({name, dataio::load_dataset(samples, in.vocab, in.length)});
  return in;
}

std::vector<NamedModel> build_models(const Settings& s, const Inputs& in) {
  const auto& ref = in.sources.front().data;
  std::vector<NamedModel> out;
  for (const auto& kind : s.model.kinds) {
    out.push_back({kind, build_model_config(s.model, kind, ref.speech_dim(), ref.text_dim(),
                                            in.vocab.size(), in.length)});
  }
  return out;
}

void emit(const ExperimentReport& report, const Flags& f, std::ostream& out) {
  out << report.table.to_csv();
  if (!f.out.empty()) {
    experiments::write_report(report, f.out);
    out << "wrote " << (fs::path(f.out) / "report.json").string() << " and table.csv\n";
  }
}

void require_sources(const Settings& s, std::size_t exactly, const char* flag) {
  if (s.data.sources.empty()) throw std::invalid_argument(std::string("missing ") + flag);
  if (exactly && s.data.sources.size() != exactly) {
    throw std::invalid_argument(std::string(flag) + " takes exactly one dataset");
  }
}

std::string vocabulary_name(std::size_t n) {
  switch (n) {
    case 4: return "basic4";
    case 6: return "emovo6";
    case 7: return "emodb7";
    default: return "generic:" + std::to_string(n);
  }
}

int cmd_train(const Flags& f, std::ostream& out) {
  const Settings s = resolve(f);
  require_sources(s, 1, "--data");
  if (s.model.kinds.size() != 1) throw std::invalid_argument("train takes a single --model");
  const auto in = load_inputs(s);
  const auto model = build_models(s, in).front();
  const auto& data = in.sources.front();
  auto result = experiments::train(model.config, data.data, s.train);

  ExperimentReport report;
  report.protocol = "train";
  report.settings = {{"train", s.train}, {"model", experiments::config_to_json(model.config)},
                     {"dataset", data.name}};
  report.table.header = {"epoch", "loss", "train_ua"};
  for (const auto& r : result.history) {
    char loss[32];
    std::snprintf(loss, sizeof loss, "%.6f", r.loss);
    report.table.rows.push_back({std::to_string(r.epoch), loss, experiments::format_ua(r.train_ua)});
  }
  report.runs.push_back({{{"dataset", data.name}, {"model", model.name}}, s.train.seed, result.history,
                         experiments::evaluate(result.params, model.config, data.data)});
  emit(report, f, out);
  const fs::path ckpt = fs::path(f.out) / "model.mdm";
  experiments::save_model(ckpt, {model.config, in.vocab, result.params});
  out << "saved " << ckpt.string() << "\n";
  return 0;
}

int cmd_eval(const Flags& f, std::ostream& out) {
  const auto saved = experiments::load_model(f.checkpoint);
  auto [name, path] = parse_input(f.sources.front());
  const auto samples = dataio::load_manifest(path, saved.vocab);
  const auto data = dataio::load_dataset(samples, saved.vocab, experiments::seq_len(saved.config));
  const auto metrics = experiments::evaluate(saved.params, saved.config, data);

  ExperimentReport report;
  report.protocol = "eval";
  report.settings = {{"checkpoint", f.checkpoint}, {"model", experiments::config_to_json(saved.config)},
                     {"dataset", name}};
  report.table.header = {"dataset", "ua", "n_test"};
  report.table.rows.push_back({name, experiments::format_ua(metrics.ua), std::to_string(metrics.count)});
  for (std::size_t c = 0; c < saved.vocab.size(); ++c) {
    report.table.header.push_back("recall_" + saved.vocab.name(c));
    report.table.rows[0].push_back(experiments::format_ua(metrics.recall[c]));
  }
  report.runs.push_back({{{"dataset", name}}, 0, {}, metrics});
  emit(report, f, out);
  return 0;
}

int cmd_within(const Flags& f, std::ostream& out) {
  const Settings s = resolve(f);
  require_sources(s, 0, "--data");
  const auto in = load_inputs(s);
  emit(experiments::run_within(in.sources, build_models(s, in), s.train, s.experiment.train_fraction,
                               f.jobs),
       f, out);
  return 0;
}

int cmd_cross(const Flags& f, std::ostream& out) {
  const Settings s = resolve(f);
  require_sources(s, 1, "--source");
  if (s.data.targets.empty()) throw std::invalid_argument("missing --target");
  const auto in = load_inputs(s);
  emit(experiments::run_cross_language(in.sources.front(), in.targets, build_models(s, in), s.train,
                                       f.jobs),
       f, out);
  return 0;
}

int cmd_kshot(const Flags& f, std::ostream& out) {
  const Settings s = resolve(f);
  require_sources(s, 1, "--source");
  if (s.data.targets.empty()) throw std::invalid_argument("missing --target");
  const auto in = load_inputs(s);
  emit(experiments::run_kshot(in.sources.front(), in.targets, build_models(s, in), s.train,
                              s.experiment.k, s.experiment.seeds, f.jobs),
       f, out);
  return 0;
}

int cmd_ablate(const Flags& f, std::ostream& out) {
  const Settings s = resolve(f);
  require_sources(s, 1, "--source");
  const auto in = load_inputs(s);
  const auto& ref = in.sources.front().data;
  const auto base = std::get<model::MdatConfig>(
      build_model_config(s.model, "mdat", ref.speech_dim(), ref.text_dim(), in.vocab.size(), in.length));
  experiments::AblationOptions opts;
  opts.gradcheck = s.experiment.gradcheck;
  opts.train_fraction = s.experiment.train_fraction;
  emit(experiments::run_ablation(in.sources.front(), in.targets, base, s.train, opts, f.jobs), f, out);
  return 0;
}

int cmd_gradcheck(const Flags& f, std::ostream& out) {
  const auto cases = experiments::run_gradient_suite(f.seed, f.jobs);
  double max64 = 0, max32 = 0;
  bool ok = true;
  out << std::setprecision(3);
  for (const auto& c : cases) {
    out << c.name << "  64-bit " << c.err64 << "  32-bit " << c.err32 << "  (entrywise " << c.entry64
        << " / " << c.entry32 << ", " << c.kinks_skipped << " of " << c.entries << " entries at a kink)"
        << (experiments::passes(c) ? "" : "  FAIL in " + c.worst_tensor) << "\n";
    max64 = std::max(max64, c.err64);
    max32 = std::max(max32, c.err32);
    ok = ok && experiments::passes(c);
  }
  out << "max relative error " << std::max(max64, max32) << " (64-bit " << max64 << ", 32-bit "
      << max32 << ")\n";
  return ok ? 0 : 1;
}

int cmd_synth(dataio::SynthOptions o, const Flags& f, std::ostream& out) {
  if (f.given("noise-seed")) o.noise_seed = f.seed;
  const auto result = dataio::synth_dataset(o, f.out);
  out << "wrote " << result.samples.size() << " samples to " << result.manifest.string()
      << " (vocabulary " << vocabulary_name(o.n_classes) << ")\n";
  return 0;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[4] = {};
  in.read(magic, 4);
  const std::string tag(magic, static_cast<std::size_t>(in.gcount()));
  if (tag == std::string(dataio::kFeatureMagic, 4)) {
    const auto h = dataio::inspect_feature_file(path);
    out << "MDF1 rows=" << h.rows << " cols=" << h.cols << "\n";
    return 0;
  }
  if (tag == std::string(model::kCheckpointMagic, 4)) {
    const auto h = model::inspect_checkpoint(path);
    out << "MDM1 version=" << h.version << " kind=" << model::to_string(h.kind)
        << " tensors=" << h.tensors.size() << "\n";
    out << "config " << h.config_json << "\n";
    for (const auto& [name, shape] : h.tensors) {
      out << name << " ";
      for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
      out << "\n";
    }
    return 0;
  }
  throw std::runtime_error(path + ": not an MDF1 feature file or MDM1 checkpoint");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multimodal dual attention transformer for speech emotion recognition", "mdat"};
  app.require_subcommand(1);
  std::map<std::string, std::unique_ptr<Flags>> flags;
  auto sub = [&](const std::string& name, const std::string& help) {
    flags[name] = std::make_unique<Flags>();
    return app.add_subcommand(name, help);
  };

  dataio::SynthOptions synth;
  auto* c_synth = sub("synth", "write a synthetic dataset (MDF1 files and manifest)");
  {
    auto& f = *flags["synth"];
    c_synth->add_option("--out", f.out, "output directory")->required();
    c_synth->add_option("--classes", synth.n_classes, "number of classes");
    c_synth->add_option("--per-class", synth.per_class, "samples per class");
    c_synth->add_option("--length", synth.length, "sequence length T");
    c_synth->add_option("--speech-dim", synth.speech_dim, "speech feature width");
    c_synth->add_option("--text-dim", synth.text_dim, "text feature width");
    c_synth->add_option("--shift", synth.shift, "drift applied to every row (language shift)");
    c_synth->add_option("--noise", synth.noise, "per-entry noise standard deviation");
    c_synth->add_option("--seed", synth.seed, "seed for class anchors and drift");
    option(c_synth, f, "noise-seed", f.seed, "seed for per-sample noise (default: --seed)");
    c_synth->add_option("--language", synth.language, "language tag")
        ->check(CLI::IsMember({"en", "de", "it", "ur", "synthetic"}));
    c_synth->add_option("--id-prefix", synth.id_prefix, "sample id prefix");
  }

  auto* c_train = sub("train", "train one model on a manifest and save model.mdm");
  {
    auto& f = *flags["train"];
    add_train_flags(c_train, f);
    f.opts["out"]->required();
    f.opts["data"] = c_train->add_option("--data", f.sources, "training manifest ([name=]path)");
    f.opts["model"] = c_train->add_option("--model", f.models, "model kind: mdat or baseline")
                          ->check(CLI::IsMember({"mdat", "baseline"}));
  }

  auto* c_eval = sub("eval", "evaluate a saved model on a manifest");
  {
    auto& f = *flags["eval"];
    c_eval->add_option("--checkpoint", f.checkpoint, "model.mdm from train")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--data", f.sources, "manifest ([name=]path)")->required()->expected(1);
    c_eval->add_option("--out", f.out, "directory for report.json and table.csv");
  }

  auto* c_within = sub("within", "within-corpus protocol: stratified split per dataset");
  {
    auto& f = *flags["within"];
    add_train_flags(c_within, f);
    add_model_list(c_within, f);
    add_jobs(c_within, f);
    f.opts["data"] = c_within->add_option("--data", f.sources, "manifests ([name=]path), repeatable");
    option(c_within, f, "train-fraction", f.train_fraction, "fraction of each class used for training");
  }

  auto* c_cross = sub("cross", "cross-language protocol: train on source, test on targets");
  {
    auto& f = *flags["cross"];
    add_train_flags(c_cross, f);
    add_model_list(c_cross, f);
    add_jobs(c_cross, f);
    f.opts["source"] = c_cross->add_option("--source", f.sources, "source manifest ([name=]path)");
    f.opts["target"] = c_cross->add_option("--target", f.targets, "target manifests, repeatable");
  }

  auto* c_kshot = sub("kshot", "k-shot adaptation: fine-tune on k target samples per class");
  {
    auto& f = *flags["kshot"];
    add_train_flags(c_kshot, f);
    add_model_list(c_kshot, f);
    add_jobs(c_kshot, f);
    f.opts["source"] = c_kshot->add_option("--source", f.sources, "source manifest ([name=]path)");
    f.opts["target"] = c_kshot->add_option("--target", f.targets, "target manifests, repeatable");
    f.opts["k"] = c_kshot->add_option("--k", f.ks, "shots per class, e.g. 0,5,10,15")->delimiter(',');
    option(c_kshot, f, "seeds", f.seeds, "number of seeds, starting at --seed")->check(CLI::PositiveNumber);
    option(c_kshot, f, "finetune-epochs", f.finetune_epochs, "fine-tuning epochs");
  }

  auto* c_ablate = sub("ablate", "module ablation: the seven graph/co-attention/transformer combinations");
  {
    auto& f = *flags["ablate"];
    add_train_flags(c_ablate, f);
    add_jobs(c_ablate, f);
    f.opts["source"] = c_ablate->add_option("--source", f.sources, "source manifest ([name=]path)");
    f.opts["target"] = c_ablate->add_option("--target", f.targets,
                                            "target manifests; without targets the source is split");
    flag(c_ablate, f, "no-gradcheck", f.no_gradcheck, "skip the gradient check before training");
    option(c_ablate, f, "train-fraction", f.train_fraction, "split fraction when no target is given");
  }

  auto* c_grad = sub("gradcheck", "compare analytic gradients with finite differences");
  {
    auto& f = *flags["gradcheck"];
    c_grad->add_option("--seed", f.seed, "seed for parameters and inputs");
    add_jobs(c_grad, f);
  }

  std::string inspect_path;
  auto* c_inspect = sub("inspect", "print the header of a feature file or checkpoint");
  c_inspect->add_option("file", inspect_path, "MDF1 or MDM1 file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*c_synth) return cmd_synth(synth, *flags["synth"], out);
    if (*c_train) return cmd_train(*flags["train"], out);
    if (*c_eval) return cmd_eval(*flags["eval"], out);
    if (*c_within) return cmd_within(*flags["within"], out);
    if (*c_cross) return cmd_cross(*flags["cross"], out);
    if (*c_kshot) return cmd_kshot(*flags["kshot"], out);
    if (*c_ablate) return cmd_ablate(*flags["ablate"], out);
    if (*c_grad) return cmd_gradcheck(*flags["gradcheck"], out);
    if (*c_inspect) return cmd_inspect(inspect_path, out);
  } catch (const experiments::DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace mdat::cli
