#include "mdat/dataio/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace mdat::dataio {

std::vector<std::size_t> Dataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

Dataset load_dataset(const std::vector<Sample>& samples, const LabelVocabulary& vocab,
                     std::size_t target_length) {
  Dataset data;
  data.vocab = vocab;
  data.samples.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.label >= vocab.size()) throw ManifestError("sample '" + s.id + "' label out of range");
    LoadedSample ls;
    ls.id = s.id;
    ls.language = s.language;
    ls.label = s.label;
    FeatureSequence speech = read_feature_file(s.speech_features);
    FeatureSequence text = read_feature_file(s.text_features);
    ls.speech_valid = std::min(speech.length(), target_length);
    ls.text_valid = std::min(text.length(), target_length);
    ls.speech = align_length(speech, target_length);
    ls.text = align_length(text, target_length);
    if (!data.samples.empty() && (ls.speech.dim() != data.speech_dim() ||
                                  ls.text.dim() != data.text_dim())) {
      throw ManifestError("sample '" + s.id + "' feature widths differ from earlier samples");
    }
    data.samples.push_back(std::move(ls));
  }
  return data;
}

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.vocab = data.vocab;
  out.samples.reserve(indices.size());
  for (auto i : indices) out.samples.push_back(data.samples.at(i));
  return out;
}

LabelVocabulary synth_vocabulary(std::size_t n_classes) {
  switch (n_classes) {
    case 4: return basic_four();
    case 6: return emovo_six();
    case 7: return emodb_seven();
    default: return vocabulary_by_name("generic:" + std::to_string(n_classes));
  }
}

namespace {

void validate(const SynthOptions& o) {
  if (o.n_classes < 2 || o.per_class == 0 || o.length == 0 || o.speech_dim == 0 ||
      o.text_dim == 0) {
    throw std::invalid_argument("synthetic dataset: counts and dimensions must be positive");
  }
  if (!(o.noise >= 0.0) || !std::isfinite(o.shift)) {
    throw std::invalid_argument("synthetic dataset: noise must be >= 0 and shift finite");
  }
}

std::vector<double> unit_gaussian(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

struct Anchors {
  std::vector<std::vector<double>> speech;
  std::vector<std::vector<double>> text;
  std::vector<double> speech_drift;
  std::vector<double> text_drift;
};

Anchors make_anchors(const SynthOptions& o) {
  std::seed_seq seq{o.seed, std::uint64_t{0xA7C4}};
  std::mt19937_64 rng(seq);
  Anchors a;
  for (std::size_t c = 0; c < o.n_classes; ++c) {
    a.speech.push_back(unit_gaussian(rng, o.speech_dim));
    a.text.push_back(unit_gaussian(rng, o.text_dim));
  }
  a.speech_drift = unit_gaussian(rng, o.speech_dim);
  a.text_drift = unit_gaussian(rng, o.text_dim);
  return a;
}

FeatureSequence draw(const std::vector<double>& anchor, const std::vector<double>& drift,
                     const SynthOptions& o, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  numerics::Tensor<float> t({o.length, anchor.size()});
  for (std::size_t r = 0; r < o.length; ++r) {
    for (std::size_t c = 0; c < anchor.size(); ++c) {
      t.at(r, c) = static_cast<float>(anchor[c] + o.shift * drift[c] + o.noise * normal(rng));
    }
  }
  return FeatureSequence(std::move(t));
}

std::string sample_id(const SynthOptions& o, std::size_t cls, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_c%zu_%04zu", cls, i);
  return o.id_prefix + buf;
}

}  // namespace

numerics::Tensor<float> synth_anchors(const SynthOptions& opts, bool speech) {
  validate(opts);
  const Anchors a = make_anchors(opts);
  const auto& rows = speech ? a.speech : a.text;
  numerics::Tensor<float> t({rows.size(), rows.front().size()});
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) t.at(r, c) = static_cast<float>(rows[r][c]);
  return t;
}

Dataset synth_in_memory(const SynthOptions& opts) {
  validate(opts);
  const Anchors anchors = make_anchors(opts);
  std::seed_seq seq{opts.noise_seed.value_or(opts.seed), std::uint64_t{0x5EED}};
  std::mt19937_64 rng(seq);
  Dataset data;
  data.vocab = synth_vocabulary(opts.n_classes);
  for (std::size_t i = 0; i < opts.per_class; ++i) {
    for (std::size_t c = 0; c < opts.n_classes; ++c) {
      LoadedSample s;
      s.id = sample_id(opts, c, i);
      s.language = opts.language;
      s.label = c;
      s.speech = draw(anchors.speech[c], anchors.speech_drift, opts, rng);
      s.text = draw(anchors.text[c], anchors.text_drift, opts, rng);
      s.speech_valid = s.text_valid = opts.length;
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

SynthOutput synth_dataset(const SynthOptions& opts, const std::filesystem::path& out_dir) {
  if (!is_known_language(opts.language)) {
    throw std::invalid_argument("unknown language tag '" + opts.language + "'");
  }
  const Dataset data = synth_in_memory(opts);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());
  SynthOutput out;
  out.vocab = data.vocab;
  out.manifest = out_dir / "manifest.jsonl";
  for (const auto& s : data.samples) {
    Sample rec;
    rec.id = s.id;
    rec.language = s.language;
    rec.label = s.label;
    rec.speech_features = out_dir / (s.id + ".speech.mdf");
    rec.text_features = out_dir / (s.id + ".text.mdf");
    write_feature_file(s.speech, rec.speech_features);
    write_feature_file(s.text, rec.text_features);
    out.samples.push_back(std::move(rec));
  }
  write_manifest(out.manifest, out.samples, out.vocab);
  return out;
}

}  // namespace mdat::dataio
