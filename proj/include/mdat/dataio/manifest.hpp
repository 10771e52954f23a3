#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mdat/dataio/feature_file.hpp"
#include "mdat/dataio/vocabulary.hpp"

namespace mdat::dataio {

enum class Split { train, test, unassigned };

const char* to_string(Split split);
Split split_from_string(const std::string& s);

/// One utterance record. Feature paths are absolute once loaded.
struct Sample {
  std::string id;
  std::string language;  // en | de | it | ur | synthetic
  std::size_t label = 0;
  std::filesystem::path speech_features;
  std::filesystem::path text_features;
  Split split = Split::unassigned;

  friend bool operator==(const Sample&, const Sample&) = default;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool is_known_language(const std::string& tag);

/// Reads line-delimited JSON records (id, language, label, speech_features,
/// text_features, split). Paths resolve against the manifest's directory and
/// both feature files must exist and carry a valid MDF1 header. Blank lines
/// are skipped; order is preserved.
std::vector<Sample> load_manifest(const std::filesystem::path& path, const LabelVocabulary& vocab);

/// Writes records with paths relative to the manifest's directory.
void write_manifest(const std::filesystem::path& path, const std::vector<Sample>& samples,
                    const LabelVocabulary& vocab);

/// Index form of the stratified split below, over a list of labels.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const std::vector<std::size_t>& labels, double train_fraction, std::uint64_t seed);

/// Stratified split: in each class round(train_fraction * n) samples go to
/// train (at least one on each side). Output keeps input order and sets the
/// split tags. Throws when a present class has fewer than 2 samples.
std::pair<std::vector<Sample>, std::vector<Sample>> split_dataset(const std::vector<Sample>& samples,
                                                                  double train_fraction,
                                                                  std::uint64_t seed);

std::vector<std::size_t> class_counts(const std::vector<Sample>& samples, std::size_t n_classes);

/// Corpora with a documented utterance selection.
enum class Corpus { iemocap, emodb, emovo, urdu };

Corpus corpus_from_string(const std::string& s);

/// Checks a four-class manifest against the documented per-class selection:
/// URDU 100 each, EMODB 127 angry / 71 happy / 79 neutral / 143 sad, EMOVO
/// 84 each. IEMOCAP only requires all four classes to be present since its
/// subset size varies between experiments. Throws ManifestError on mismatch.
void validate_corpus_counts(Corpus corpus, const std::vector<Sample>& samples,
                            const LabelVocabulary& vocab);

}  // namespace mdat::dataio
