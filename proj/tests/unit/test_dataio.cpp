#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "doctest.h"
#include "mdat/dataio/dataset.hpp"
#include "support.hpp"

using namespace mdat::dataio;
using mdat::numerics::Tensor;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

FeatureSequence random_sequence(std::mt19937_64& rng, std::size_t t, std::size_t d) {
  return FeatureSequence(testing::random_tensor<float>(rng, {t, d}, -100.0, 100.0));
}

ParseErrorKind parse_kind(const std::string& bytes) {
  try {
    decode_features(bytes);
  } catch (const ParseError& e) {
    return e.kind();
  }
  FAIL("expected a parse error");
  return ParseErrorKind::io;
}

}  // namespace

TEST_CASE("MDF1 layout of a 2x3 matrix") {
  Tensor<float> t({2, 3});
  for (std::size_t i = 0; i < 6; ++i) t.data()[i] = float(i) + 0.5f;
  const std::string bytes = encode_features(FeatureSequence(t));
  REQUIRE(bytes.size() == 12 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "MDF1");
  std::string header;
  put_u32(header, 2);
  put_u32(header, 3);
  CHECK(bytes.substr(4, 8) == header);
  float third;
  std::memcpy(&third, bytes.data() + 12 + 2 * 4, 4);
  CHECK(third == 2.5f);
}

TEST_CASE("MDF1 round trip is byte exact over many random sequences") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> dim(1, 9);
  for (int trial = 0; trial < 10000; ++trial) {
    const auto seq = random_sequence(rng, dim(rng), dim(rng));
    const auto bytes = encode_features(seq);
    const auto back = decode_features(bytes);
    REQUIRE(back == seq);
    REQUIRE(encode_features(back) == bytes);
  }
}

TEST_CASE("MDF1 files round trip and inspect") {
  testing::TempDir dir;
  std::mt19937_64 rng(12);
  const auto seq = random_sequence(rng, 5, 7);
  write_feature_file(seq, dir / "a.mdf");
  CHECK(read_feature_file(dir / "a.mdf") == seq);
  const auto h = inspect_feature_file(dir / "a.mdf");
  CHECK(h.rows == 5);
  CHECK(h.cols == 7);
  write_feature_file(read_feature_file(dir / "a.mdf"), dir / "b.mdf");
  CHECK(read_bytes(dir / "a.mdf") == read_bytes(dir / "b.mdf"));
}

TEST_CASE("MDF1 parse errors") {
  std::mt19937_64 rng(13);
  const std::string good = encode_features(random_sequence(rng, 3, 2));

  CHECK(parse_kind("MDF") == ParseErrorKind::truncated);
  CHECK(parse_kind("XDF1" + good.substr(4)) == ParseErrorKind::bad_magic);
  CHECK(parse_kind(good.substr(0, good.size() - 1)) == ParseErrorKind::truncated);
  CHECK(parse_kind(good + "x") == ParseErrorKind::trailing_bytes);

  std::string zero_rows = "MDF1";
  put_u32(zero_rows, 0);
  put_u32(zero_rows, 2);
  CHECK_THROWS_AS(decode_features(zero_rows), ParseError);

  std::string huge = "MDF1";
  put_u32(huge, 0xffffffffu);
  put_u32(huge, 0xffffffffu);
  CHECK(parse_kind(huge) == ParseErrorKind::overflow);

  std::string nan_bytes = good;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan_bytes.data() + 12 + 4, &nan, 4);
  CHECK(parse_kind(nan_bytes) == ParseErrorKind::non_finite);

  testing::TempDir dir;
  CHECK_THROWS_AS(read_feature_file(dir / "missing.mdf"), ParseError);
  write_bytes(dir / "short.mdf", good.substr(0, 20));
  CHECK_THROWS_AS(inspect_feature_file(dir / "short.mdf"), ParseError);
}

TEST_CASE("align_length pads and truncates") {
  std::mt19937_64 rng(14);
  const auto seq = random_sequence(rng, 4, 3);
  const auto padded = align_length(seq, 6);
  CHECK(padded.length() == 6);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t k = 0; k < 3; ++k) CHECK(padded.values().at(t, k) == seq.values().at(t, k));
  for (std::size_t t = 4; t < 6; ++t)
    for (std::size_t k = 0; k < 3; ++k) CHECK(padded.values().at(t, k) == 0.0f);
  const auto cut = align_length(seq, 2);
  CHECK(cut.length() == 2);
  CHECK(cut.values().at(1, 2) == seq.values().at(1, 2));
  CHECK(align_length(seq, 4) == seq);
  CHECK_THROWS(align_length(seq, 0));
}

TEST_CASE("vocabularies") {
  CHECK(basic_four().names() == std::vector<std::string>{"angry", "happy", "neutral", "sad"});
  CHECK(emodb_seven().size() == 7);
  CHECK(emovo_six().size() == 6);
  CHECK(vocabulary_by_name("generic:3").names() == std::vector<std::string>{"c0", "c1", "c2"});
  CHECK(basic_four().index_of("neutral") == 2);
  CHECK_FALSE(basic_four().find("bored"));
  CHECK_THROWS_WITH(basic_four().index_of("bored"), doctest::Contains("bored"));
  CHECK_THROWS(vocabulary_by_name("klingon"));
}

TEST_CASE("manifest round trip through the synthetic generator") {
  testing::TempDir dir;
  SynthOptions o;
  o.per_class = 3;
  o.length = 4;
  o.speech_dim = 5;
  o.text_dim = 3;
  const auto out = synth_dataset(o, dir.path());
  REQUIRE(out.samples.size() == 12);
  const auto loaded = load_manifest(out.manifest, out.vocab);
  CHECK(loaded == out.samples);
  for (const auto& s : loaded) {
    CHECK(inspect_feature_file(s.speech_features).cols == 5);
    CHECK(inspect_feature_file(s.text_features).cols == 3);
  }
  const auto data = load_dataset(loaded, out.vocab, 4);
  const auto mem = synth_in_memory(o);
  REQUIRE(data.size() == mem.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(data.samples[i].speech == mem.samples[i].speech);
    CHECK(data.samples[i].text == mem.samples[i].text);
    CHECK(data.samples[i].label == mem.samples[i].label);
  }
}

TEST_CASE("synthetic generation is deterministic") {
  testing::TempDir a, b;
  SynthOptions o;
  o.per_class = 2;
  const auto ra = synth_dataset(o, a.path());
  const auto rb = synth_dataset(o, b.path());
  CHECK(read_bytes(ra.manifest) == read_bytes(rb.manifest));
  for (std::size_t i = 0; i < ra.samples.size(); ++i) {
    CHECK(read_bytes(ra.samples[i].speech_features) == read_bytes(rb.samples[i].speech_features));
    CHECK(read_bytes(ra.samples[i].text_features) == read_bytes(rb.samples[i].text_features));
  }
  o.seed = 2;
  CHECK_FALSE(synth_in_memory(o).samples[0].speech == synth_in_memory(SynthOptions{}).samples[0].speech);
}

TEST_CASE("synthetic class means sit near the shifted anchors") {
  SynthOptions o;
  o.per_class = 50;
  o.shift = 1.5;
  const auto data = synth_in_memory(o);
  SynthOptions zero = o;
  zero.shift = 0.0;
  const auto base = synth_in_memory(zero);
  const auto anchors = synth_anchors(o, true);
  // Shift moves every row by the same vector: recover it from the two sets.
  std::vector<double> drift(o.speech_dim, 0.0);
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t k = 0; k < o.speech_dim; ++k)
      drift[k] += double(data.samples[i].speech.values().at(0, k)) / double(data.size()) -
                  double(base.samples[i].speech.values().at(0, k)) / double(base.size());
  double norm = 0;
  for (double v : drift) norm += v * v;
  CHECK(std::sqrt(norm) == doctest::Approx(1.5).epsilon(0.01));

  for (std::size_t c = 0; c < o.n_classes; ++c) {
    double norm_c = 0;
    for (std::size_t k = 0; k < o.speech_dim; ++k) norm_c += double(anchors.at(c, k)) * anchors.at(c, k);
    CHECK(std::sqrt(norm_c) == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("manifest errors name the line") {
  testing::TempDir dir;
  SynthOptions o;
  o.per_class = 1;
  const auto out = synth_dataset(o, dir.path());
  auto lines = read_bytes(out.manifest);
  write_bytes(dir / "bad.jsonl", lines + "{\"id\": 3}\n");
  CHECK_THROWS_WITH_AS(load_manifest(dir / "bad.jsonl", out.vocab), doctest::Contains("line 5"),
                       ManifestError);
  write_bytes(dir / "dup.jsonl", lines + lines.substr(0, lines.find('\n') + 1));
  CHECK_THROWS_WITH_AS(load_manifest(dir / "dup.jsonl", out.vocab), doctest::Contains("duplicate"),
                       ManifestError);
  CHECK_THROWS_AS(load_manifest(out.manifest, LabelVocabulary({"x", "y"})), ManifestError);
  CHECK_THROWS_AS(load_manifest(dir / "nope.jsonl", out.vocab), ManifestError);
}

TEST_CASE("stratified split") {
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 10 + c; ++i) labels.push_back(c);
  std::shuffle(labels.begin(), labels.end(), std::mt19937_64(3));
  const auto [train, test] = split_indices(labels, 0.8, 7);
  CHECK(train.size() + test.size() == labels.size());
  std::set<std::size_t> all(train.begin(), train.end());
  for (auto i : test) CHECK(all.insert(i).second);
  CHECK(all.size() == labels.size());
  for (std::size_t c = 0; c < 4; ++c) {
    std::size_t n = 0;
    for (auto i : train) n += labels[i] == c;
    CHECK(n == std::size_t(std::llround(0.8 * double(10 + c))));
  }
  CHECK(split_indices(labels, 0.8, 7) == split_indices(labels, 0.8, 7));
  CHECK_THROWS(split_indices({0, 1, 1}, 0.5, 1));
  CHECK_THROWS(split_indices(labels, 1.0, 1));
}

TEST_CASE("corpus count validation") {
  auto make = [](std::vector<std::size_t> counts) {
    std::vector<Sample> out;
    for (std::size_t c = 0; c < counts.size(); ++c)
      for (std::size_t i = 0; i < counts[c]; ++i) out.push_back({"s", "en", c, {}, {}, Split::unassigned});
    return out;
  };
  CHECK_NOTHROW(validate_corpus_counts(Corpus::emodb, make({127, 71, 79, 143}), basic_four()));
  CHECK_THROWS_AS(validate_corpus_counts(Corpus::emodb, make({127, 71, 79, 142}), basic_four()),
                  ManifestError);
  CHECK_NOTHROW(validate_corpus_counts(Corpus::urdu, make({100, 100, 100, 100}), basic_four()));
  CHECK_NOTHROW(validate_corpus_counts(Corpus::emovo, make({84, 84, 84, 84}), basic_four()));
  CHECK_NOTHROW(validate_corpus_counts(Corpus::iemocap, make({3, 1, 2, 9}), basic_four()));
  CHECK_THROWS_AS(validate_corpus_counts(Corpus::iemocap, make({3, 0, 2, 9}), basic_four()),
                  ManifestError);
}
