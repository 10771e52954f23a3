#include <cstring>
#include <fstream>
#include <random>

#include "doctest.h"
#include "mdat/experiments/model_config.hpp"
#include "support.hpp"

using namespace mdat;
using model::Checkpoint;
using model::ModelKind;

namespace {

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

model::MdatConfig small_mdat() {
  model::MdatConfig c;
  c.d_model = 6;
  c.d_text = 4;
  c.seq_len = 3;
  c.n_heads = 2;
  return c;
}

dataio::ParseErrorKind decode_kind(const std::string& bytes) {
  try {
    model::decode_checkpoint(bytes);
  } catch (const dataio::ParseError& e) {
    return e.kind();
  }
  FAIL("expected a parse error");
  return dataio::ParseErrorKind::io;
}

}  // namespace

TEST_CASE("checkpoint round trip is byte exact") {
  testing::TempDir dir;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Checkpoint c{seed % 2 ? ModelKind::mdat : ModelKind::baseline, "{\"seed\":" + std::to_string(seed) + "}",
                 model::init_mdat_params(small_mdat(), seed)};
    const auto bytes = model::encode_checkpoint(c);
    const auto back = model::decode_checkpoint(bytes);
    REQUIRE(back == c);
    REQUIRE(model::encode_checkpoint(back) == bytes);
    model::save_checkpoint(c, dir / "a.mdm");
    model::save_checkpoint(model::load_checkpoint(dir / "a.mdm"), dir / "b.mdm");
    REQUIRE(read_bytes(dir / "a.mdm") == read_bytes(dir / "b.mdm"));
  }
}

TEST_CASE("checkpoint header") {
  testing::TempDir dir;
  const auto params = model::init_mdat_params(small_mdat(), 3);
  model::save_checkpoint({ModelKind::baseline, "{}", params}, dir / "c.mdm");
  const auto h = model::inspect_checkpoint(dir / "c.mdm");
  CHECK(h.version == model::kCheckpointVersion);
  CHECK(h.kind == ModelKind::baseline);
  CHECK(h.config_json == "{}");
  REQUIRE(h.tensors.size() == params.size());
  CHECK(h.tensors[0].first == params.entries()[0].first);
  CHECK(h.tensors[0].second == params.entries()[0].second.shape());
  CHECK(read_bytes(dir / "c.mdm").substr(0, 4) == "MDM1");
}

TEST_CASE("checkpoint parse errors") {
  const auto bytes =
      model::encode_checkpoint({ModelKind::mdat, "{}", model::init_mdat_params(small_mdat(), 4)});
  CHECK(decode_kind("MDM") == dataio::ParseErrorKind::truncated);
  CHECK(decode_kind("MDF1" + bytes.substr(4)) == dataio::ParseErrorKind::bad_magic);
  CHECK(decode_kind(bytes.substr(0, bytes.size() - 2)) == dataio::ParseErrorKind::truncated);
  CHECK(decode_kind(bytes + std::string(1, '\0')) == dataio::ParseErrorKind::trailing_bytes);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  CHECK_THROWS_AS(model::decode_checkpoint(bad_version), dataio::ParseError);
  std::string nan = bytes;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + nan.size() - 4, &q, 4);
  CHECK(decode_kind(nan) == dataio::ParseErrorKind::non_finite);
}

TEST_CASE("saved models restore config, vocabulary and parameters") {
  testing::TempDir dir;
  for (const experiments::ModelConfig& config :
       {experiments::ModelConfig(small_mdat()), experiments::ModelConfig(baseline::BaselineConfig{
                                                    6, 4, 3, 5, 7, 4, 0.1, 1e-4})}) {
    experiments::SavedModel m{config, dataio::basic_four(), experiments::init_params(config, 5)};
    experiments::save_model(dir / "m.mdm", m);
    const auto back = experiments::load_model(dir / "m.mdm");
    CHECK(back.config == m.config);
    CHECK(back.vocab == m.vocab);
    CHECK(back.params == m.params);
  }
  experiments::SavedModel wrong{small_mdat(), dataio::basic_four(),
                                model::init_mdat_params(model::ablation_config(small_mdat(), 3), 1)};
  CHECK_THROWS(experiments::save_model(dir / "w.mdm", wrong));
}

TEST_CASE("model config json") {
  const experiments::ModelConfig c = small_mdat();
  CHECK(experiments::config_from_json(experiments::config_to_json(c)) == c);
  CHECK(experiments::config_to_json(c)["kind"] == "mdat");
  CHECK_THROWS(experiments::config_from_json({{"kind", "rnn"}, {"config", nlohmann::json::object()}}));
}
