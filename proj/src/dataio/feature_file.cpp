#include "mdat/dataio/feature_file.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace mdat::dataio {

namespace {

static_assert(std::numeric_limits<float>::is_iec559, "MDF1 requires IEEE-754 binary32");

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

FeatureHeader decode_header(const std::string& bytes, std::uint64_t total_size) {
  if (std::memcmp(bytes.data(), kFeatureMagic, std::min<std::size_t>(bytes.size(), 4)) != 0) {
    throw ParseError(ParseErrorKind::bad_magic, "feature file: missing MDF1 magic");
  }
  if (bytes.size() < kFeatureHeaderBytes) {
    throw ParseError(ParseErrorKind::truncated, "feature file: truncated header");
  }
  FeatureHeader h{get_u32(bytes, 4), get_u32(bytes, 8)};
  if (h.rows == 0 || h.cols == 0) {
    throw ParseError(ParseErrorKind::truncated, "feature file: zero rows or columns");
  }
  const std::uint64_t count = static_cast<std::uint64_t>(h.rows) * h.cols;
  if (count > std::numeric_limits<std::uint64_t>::max() / 4 - kFeatureHeaderBytes ||
      count > static_cast<std::uint64_t>(std::numeric_limits<std::ptrdiff_t>::max()) / 4) {
    throw ParseError(ParseErrorKind::overflow, "feature file: rows*cols overflows");
  }
  const std::uint64_t expected = kFeatureHeaderBytes + 4 * count;
  if (total_size < expected) {
    throw ParseError(ParseErrorKind::truncated,
                     "feature file: payload truncated (" + std::to_string(total_size) + " of " +
                         std::to_string(expected) + " bytes)");
  }
  if (total_size > expected) {
    throw ParseError(ParseErrorKind::trailing_bytes, "feature file: trailing bytes after payload");
  }
  return h;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrorKind::io, "cannot open feature file " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

FeatureSequence::FeatureSequence(numerics::Tensor<float> values) : values_(std::move(values)) {
  if (values_.rank() != 2) throw numerics::ShapeError("feature sequence must be a T x D matrix");
  if (!values_.all_finite()) throw numerics::NumericError("feature sequence has non-finite values");
}

FeatureSequence::FeatureSequence(std::size_t length, std::size_t dim)
    : values_({length, dim}) {}

const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::io: return "io";
    case ParseErrorKind::bad_magic: return "bad_magic";
    case ParseErrorKind::truncated: return "truncated";
    case ParseErrorKind::overflow: return "overflow";
    case ParseErrorKind::non_finite: return "non_finite";
    case ParseErrorKind::trailing_bytes: return "trailing_bytes";
  }
  return "unknown";
}

std::string encode_features(const FeatureSequence& seq) {
  const auto& v = seq.values();
  if (v.rows() > std::numeric_limits<std::uint32_t>::max() ||
      v.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw ParseError(ParseErrorKind::overflow, "feature sequence too large for MDF1");
  }
  std::string out;
  out.reserve(kFeatureHeaderBytes + 4 * v.size());
  out.append(kFeatureMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(v.rows()));
  put_u32(out, static_cast<std::uint32_t>(v.cols()));
  for (float x : v.data()) put_u32(out, std::bit_cast<std::uint32_t>(x));
  return out;
}

FeatureSequence decode_features(const std::string& bytes) {
  const FeatureHeader h = decode_header(bytes, bytes.size());
  numerics::Tensor<float> t({h.rows, h.cols});
  for (std::size_t i = 0; i < t.size(); ++i) {
    const float x = std::bit_cast<float>(get_u32(bytes, kFeatureHeaderBytes + 4 * i));
    if (!std::isfinite(x)) {
      throw ParseError(ParseErrorKind::non_finite,
                       "feature file: non-finite value at element " + std::to_string(i));
    }
    t[i] = x;
  }
  return FeatureSequence(std::move(t));
}

void write_feature_file(const FeatureSequence& seq, const std::filesystem::path& path) {
  const std::string bytes = encode_features(seq);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write feature file " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

FeatureSequence read_feature_file(const std::filesystem::path& path) {
  try {
    return decode_features(slurp(path));
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), path.string() + ": " + e.what());
  }
}

FeatureHeader inspect_feature_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrorKind::io, "cannot open feature file " + path.string());
  std::string head(kFeatureHeaderBytes, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw ParseError(ParseErrorKind::io, "cannot stat " + path.string());
  try {
    return decode_header(head, size);
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), path.string() + ": " + e.what());
  }
}

FeatureSequence align_length(const FeatureSequence& seq, std::size_t target_length) {
  if (target_length == 0) throw std::invalid_argument("align_length: target length must be >= 1");
  if (seq.length() == target_length) return seq;
  const std::size_t d = seq.dim();
  const std::size_t keep = std::min(seq.length(), target_length);
  numerics::Tensor<float> out({target_length, d});
  const auto src = seq.values().data();
  std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(keep * d), out.data().begin());
  return FeatureSequence(std::move(out));
}

}  // namespace mdat::dataio
