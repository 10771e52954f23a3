#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "mdat/numerics/tensor.hpp"

namespace mdat::dataio {

/// T x D matrix of pre-extracted embeddings for one utterance in one
/// modality. Always finite, T >= 1, D >= 1.
class FeatureSequence {
 public:
  FeatureSequence() = default;
  explicit FeatureSequence(numerics::Tensor<float> values);
  FeatureSequence(std::size_t length, std::size_t dim);

  std::size_t length() const { return values_.rows(); }
  std::size_t dim() const { return values_.cols(); }
  const numerics::Tensor<float>& values() const { return values_; }
  numerics::Tensor<float>& values() { return values_; }

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;

 private:
  numerics::Tensor<float> values_;
};

enum class ParseErrorKind { io, bad_magic, truncated, overflow, non_finite, trailing_bytes };

const char* to_string(ParseErrorKind kind);

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ParseErrorKind kind() const { return kind_; }

 private:
  ParseErrorKind kind_;
};

inline constexpr char kFeatureMagic[4] = {'M', 'D', 'F', '1'};
inline constexpr std::size_t kFeatureHeaderBytes = 12;

struct FeatureHeader {
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
};

/// MDF1 layout: "MDF1", rows (u32 LE), cols (u32 LE), rows*cols f32 LE
/// values in row-major order. Nothing else.
void write_feature_file(const FeatureSequence& seq, const std::filesystem::path& path);
FeatureSequence read_feature_file(const std::filesystem::path& path);

/// Reads and validates only the header, checking the file size against it.
FeatureHeader inspect_feature_file(const std::filesystem::path& path);

/// In-memory codec used by the file functions.
std::string encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(const std::string& bytes);

/// Pads with trailing zero rows or keeps the leading `target_length` rows.
FeatureSequence align_length(const FeatureSequence& seq, std::size_t target_length);

}  // namespace mdat::dataio
