#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mdat/dataio/feature_file.hpp"
#include "mdat/dataio/manifest.hpp"
#include "mdat/dataio/vocabulary.hpp"

namespace mdat::dataio {

/// A sample with both feature sequences loaded and aligned to the configured
/// length. `*_valid` counts the non-padded leading rows.
struct LoadedSample {
  std::string id;
  std::string language;
  std::size_t label = 0;
  FeatureSequence speech;
  FeatureSequence text;
  std::size_t speech_valid = 0;
  std::size_t text_valid = 0;
};

struct Dataset {
  LabelVocabulary vocab;
  std::vector<LoadedSample> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t speech_dim() const { return samples.empty() ? 0 : samples.front().speech.dim(); }
  std::size_t text_dim() const { return samples.empty() ? 0 : samples.front().text.dim(); }
  std::size_t length() const { return samples.empty() ? 0 : samples.front().speech.length(); }
  std::vector<std::size_t> labels() const;
};

/// Reads every feature file, aligns both modalities to `target_length`, and
/// checks that all samples share the same speech and text widths.
Dataset load_dataset(const std::vector<Sample>& samples, const LabelVocabulary& vocab,
                     std::size_t target_length);

Dataset subset(const Dataset& data, const std::vector<std::size_t>& indices);

/// Desk-scale stand-in for extractor output. For class c every row of the
/// speech sequence is drawn from N(mu_c^s + shift * delta^s, noise^2 I) and
/// likewise for text, where the unit-norm class anchors mu_c and the unit
/// drift delta are derived from `seed` alone, and the per-sample noise from
/// `noise_seed` (defaults to `seed`).
struct SynthOptions {
  std::size_t n_classes = 4;
  std::size_t per_class = 20;
  std::size_t length = 8;
  std::size_t speech_dim = 16;
  std::size_t text_dim = 12;
  double shift = 0.0;
  double noise = 0.1;
  std::uint64_t seed = 1;
  std::optional<std::uint64_t> noise_seed;
  std::string language = "synthetic";
  std::string id_prefix = "syn";
};

/// Vocabulary used for synthetic data with `n_classes` classes.
LabelVocabulary synth_vocabulary(std::size_t n_classes);

/// The class anchors (rows = classes) for one modality.
numerics::Tensor<float> synth_anchors(const SynthOptions& opts, bool speech);

/// Generates the dataset in memory; samples are ordered class-interleaved.
Dataset synth_in_memory(const SynthOptions& opts);

struct SynthOutput {
  std::vector<Sample> samples;
  LabelVocabulary vocab;
  std::filesystem::path manifest;
};

/// Writes `<id>.speech.mdf`, `<id>.text.mdf` per sample and `manifest.jsonl`
/// into `out_dir` (created if needed).
SynthOutput synth_dataset(const SynthOptions& opts, const std::filesystem::path& out_dir);

}  // namespace mdat::dataio
