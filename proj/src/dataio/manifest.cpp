#include "mdat/dataio/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "json.hpp"

namespace mdat::dataio {

namespace {

using json = nlohmann::json;

const std::set<std::string> kManifestFields = {"id",       "language",        "label",
                                               "speech_features", "text_features", "split"};

std::string require_string(const json& rec, const char* field, std::size_t line) {
  auto it = rec.find(field);
  if (it == rec.end() || !it->is_string()) {
    throw ManifestError("manifest line " + std::to_string(line) + ": missing string field '" +
                        field + "'");
  }
  return it->get<std::string>();
}

}  // namespace

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "unassigned";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  if (s == "unassigned") return Split::unassigned;
  throw std::invalid_argument("unknown split '" + s + "'");
}

bool is_known_language(const std::string& tag) {
  static const std::set<std::string> known = {"en", "de", "it", "ur", "synthetic"};
  return known.count(tag) != 0;
}

std::vector<Sample> load_manifest(const std::filesystem::path& path, const LabelVocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<Sample> out;
  std::set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ManifestError("manifest line " + std::to_string(line) + ": malformed record (" +
                          e.what() + ")");
    }
    if (!rec.is_object()) {
      throw ManifestError("manifest line " + std::to_string(line) + ": record must be an object");
    }
    for (const auto& [key, _] : rec.items()) {
      if (!kManifestFields.count(key)) {
        throw ManifestError("manifest line " + std::to_string(line) + ": unknown field '" + key +
                            "'");
      }
    }
    Sample s;
    s.id = require_string(rec, "id", line);
    s.language = require_string(rec, "language", line);
    if (!is_known_language(s.language)) {
      throw ManifestError("manifest line " + std::to_string(line) + ": unknown language '" +
                          s.language + "'");
    }
    const std::string label = require_string(rec, "label", line);
    auto idx = vocab.find(label);
    if (!idx) {
      throw ManifestError("manifest line " + std::to_string(line) + ": unknown label '" + label +
                          "'");
    }
    s.label = *idx;
    try {
      s.split = split_from_string(require_string(rec, "split", line));
    } catch (const std::invalid_argument& e) {
      throw ManifestError("manifest line " + std::to_string(line) + ": " + e.what());
    }
    if (!ids.insert(s.id).second) {
      throw ManifestError("manifest line " + std::to_string(line) + ": duplicate id '" + s.id + "'");
    }
    for (auto [field, dest] : {std::pair{"speech_features", &s.speech_features},
                               std::pair{"text_features", &s.text_features}}) {
      std::filesystem::path p = require_string(rec, field, line);
      if (p.is_relative()) p = base / p;
      if (!std::filesystem::exists(p)) {
        throw ManifestError("manifest line " + std::to_string(line) + ": missing file " +
                            p.string());
      }
      try {
        inspect_feature_file(p);
      } catch (const ParseError& e) {
        throw ManifestError("manifest line " + std::to_string(line) + ": " + e.what());
      }
      *dest = p.lexically_normal();
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const std::vector<Sample>& samples,
                    const LabelVocabulary& vocab) {
  const auto base = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ManifestError("cannot write manifest " + path.string());
  auto rel = [&](const std::filesystem::path& p) {
    return std::filesystem::weakly_canonical(p).lexically_relative(
        std::filesystem::weakly_canonical(base));
  };
  for (const auto& s : samples) {
    json rec;
    rec["id"] = s.id;
    rec["language"] = s.language;
    rec["label"] = vocab.name(s.label);
    rec["speech_features"] = rel(s.speech_features).generic_string();
    rec["text_features"] = rel(s.text_features).generic_string();
    rec["split"] = to_string(s.split);
    out << rec.dump() << '\n';
  }
  if (!out) throw ManifestError("write failed for manifest " + path.string());
}

std::vector<std::size_t> class_counts(const std::vector<Sample>& samples, std::size_t n_classes) {
  std::vector<std::size_t> counts(n_classes, 0);
  for (const auto& s : samples) {
    if (s.label >= n_classes) throw std::out_of_range("sample label outside vocabulary");
    ++counts[s.label];
  }
  return counts;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const std::vector<std::size_t>& labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train fraction must lie in (0, 1)");
  }
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<bool> in_train(labels.size(), false);
  for (auto& [label, idx] : by_class) {
    if (idx.size() < 2) {
      throw std::invalid_argument("class " + std::to_string(label) +
                                  " has fewer than 2 samples; cannot split");
    }
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_fraction * double(idx.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
    for (std::size_t k = 0; k < n_train; ++k) in_train[idx[k]] = true;
  }

  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> parts;
  for (std::size_t i = 0; i < labels.size(); ++i) (in_train[i] ? parts.first : parts.second).push_back(i);
  return parts;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(const std::vector<Sample>& samples,
                                                                  double train_fraction,
                                                                  std::uint64_t seed) {
  std::vector<std::size_t> labels;
  for (const auto& s : samples) labels.push_back(s.label);
  const auto [train_idx, test_idx] = split_indices(labels, train_fraction, seed);
  std::pair<std::vector<Sample>, std::vector<Sample>> parts;
  for (auto i : train_idx) {
    parts.first.push_back(samples[i]);
    parts.first.back().split = Split::train;
  }
  for (auto i : test_idx) {
    parts.second.push_back(samples[i]);
    parts.second.back().split = Split::test;
  }
  return parts;
}

Corpus corpus_from_string(const std::string& s) {
  if (s == "iemocap") return Corpus::iemocap;
  if (s == "emodb") return Corpus::emodb;
  if (s == "emovo") return Corpus::emovo;
  if (s == "urdu") return Corpus::urdu;
  throw std::invalid_argument("unknown corpus '" + s + "'");
}

void validate_corpus_counts(Corpus corpus, const std::vector<Sample>& samples,
                            const LabelVocabulary& vocab) {
  if (!(vocab == basic_four())) {
    throw ManifestError("corpus validation applies to the four-class vocabulary only");
  }
  const auto counts = class_counts(samples, vocab.size());
  std::map<std::string, std::size_t> expected;
  switch (corpus) {
    case Corpus::urdu:
      expected = {{"angry", 100}, {"happy", 100}, {"neutral", 100}, {"sad", 100}};
      break;
    case Corpus::emodb:
      expected = {{"angry", 127}, {"happy", 71}, {"neutral", 79}, {"sad", 143}};
      break;
    case Corpus::emovo:
      expected = {{"angry", 84}, {"happy", 84}, {"neutral", 84}, {"sad", 84}};
      break;
    case Corpus::iemocap:
      for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0) throw ManifestError("IEMOCAP manifest has no '" + vocab.name(c) + "'");
      }
      return;
  }
  for (const auto& [name, want] : expected) {
    const std::size_t got = counts[vocab.index_of(name)];
    if (got != want) {
      throw ManifestError("class '" + name + "' has " + std::to_string(got) +
                          " utterances, expected " + std::to_string(want));
    }
  }
}

}  // namespace mdat::dataio
