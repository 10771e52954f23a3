#include "mdat/dataio/vocabulary.hpp"

#include <set>
#include <stdexcept>

namespace mdat::dataio {

LabelVocabulary::LabelVocabulary(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw std::invalid_argument("label vocabulary must not be empty");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw std::invalid_argument("label names must be non-empty");
    if (!seen.insert(n).second) throw std::invalid_argument("duplicate label '" + n + "'");
  }
}

std::optional<std::size_t> LabelVocabulary::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t LabelVocabulary::index_of(const std::string& name) const {
  if (auto i = find(name)) return *i;
  throw std::invalid_argument("unknown label '" + name + "'");
}

LabelVocabulary basic_four() { return LabelVocabulary({"angry", "happy", "neutral", "sad"}); }

LabelVocabulary emodb_seven() {
  return LabelVocabulary({"angry", "bored", "disgust", "fear", "happy", "neutral", "sad"});
}

LabelVocabulary emovo_six() {
  return LabelVocabulary({"angry", "disgust", "fear", "happy", "neutral", "sad"});
}

LabelVocabulary vocabulary_by_name(const std::string& name) {
  if (name == "basic4") return basic_four();
  if (name == "emodb7") return emodb_seven();
  if (name == "emovo6") return emovo_six();
  const std::string prefix = "generic:";
  if (name.rfind(prefix, 0) == 0) {
    std::size_t n = 0;
    try {
      n = std::stoul(name.substr(prefix.size()));
    } catch (const std::exception&) {
      n = 0;
    }
    if (n < 2) throw std::invalid_argument("generic vocabulary needs at least 2 classes: " + name);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n; ++i) names.push_back("c" + std::to_string(i));
    return LabelVocabulary(std::move(names));
  }
  throw std::invalid_argument("unknown vocabulary '" + name + "'");
}

}  // namespace mdat::dataio
