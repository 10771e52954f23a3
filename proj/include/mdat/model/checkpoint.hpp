#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mdat/dataio/feature_file.hpp"
#include "mdat/numerics/param_set.hpp"

namespace mdat::model {

enum class ModelKind : std::uint32_t { mdat = 0, baseline = 1 };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

inline constexpr char kCheckpointMagic[4] = {'M', 'D', 'M', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// MDM1 layout, all integers u32 LE:
///   "MDM1", version, model kind, config length, config (UTF-8 JSON),
///   tensor count, then per tensor: name length, name, rank, dims, f32 LE payload.
struct Checkpoint {
  ModelKind kind = ModelKind::mdat;
  std::string config_json;
  numerics::ParamSet<float> params;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

struct CheckpointHeader {
  std::uint32_t version = 0;
  ModelKind kind = ModelKind::mdat;
  std::string config_json;
  std::vector<std::pair<std::string, numerics::Shape>> tensors;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
CheckpointHeader inspect_checkpoint(const std::filesystem::path& path);

}  // namespace mdat::model
