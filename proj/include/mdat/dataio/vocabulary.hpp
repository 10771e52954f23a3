#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mdat::dataio {

/// Ordered emotion class names; a class's index is its position.
class LabelVocabulary {
 public:
  LabelVocabulary() = default;
  explicit LabelVocabulary(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t index) const { return names_.at(index); }
  std::optional<std::size_t> find(const std::string& name) const;
  /// Throws naming the label when it is not in the vocabulary.
  std::size_t index_of(const std::string& name) const;

  friend bool operator==(const LabelVocabulary&, const LabelVocabulary&) = default;

 private:
  std::vector<std::string> names_;
};

/// angry, happy, neutral, sad: the label set shared by all four corpora and
/// used for every cross-language experiment.
LabelVocabulary basic_four();
/// Seven-class EMODB within-corpus set.
LabelVocabulary emodb_seven();
/// Six-class EMOVO within-corpus set.
LabelVocabulary emovo_six();

/// "basic4", "emodb7", "emovo6", or "generic:<n>" (classes c0..c{n-1}).
LabelVocabulary vocabulary_by_name(const std::string& name);

}  // namespace mdat::dataio
