#include "mdat/model/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mdat::model {

using dataio::ParseError;
using dataio::ParseErrorKind;

namespace {

constexpr std::uint32_t kMaxNameBytes = 4096;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw std::length_error(std::string("checkpoint: ") + what + " too large");
  return static_cast<std::uint32_t>(v);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string text(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  float f32() {
    need(4, "tensor payload");
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i)
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return std::bit_cast<float>(bits);
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw ParseError(ParseErrorKind::truncated, std::string("checkpoint: truncated ") + what);
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

ModelKind kind_from_u32(std::uint32_t v) {
  if (v > 1) {
    throw ParseError(ParseErrorKind::bad_magic, "checkpoint: unknown model kind " + std::to_string(v));
  }
  return static_cast<ModelKind>(v);
}

// Parses up to and including the tensor table. With `payload` null the
// tensor values are skipped (but still bounds-checked).
CheckpointHeader parse(const std::string& bytes, numerics::ParamSet<float>* payload) {
  if (std::memcmp(bytes.data(), kCheckpointMagic, std::min<std::size_t>(bytes.size(), 4)) != 0) {
    throw ParseError(ParseErrorKind::bad_magic, "checkpoint: missing MDM1 magic");
  }
  Reader r(bytes);
  r.text(4, "magic");
  CheckpointHeader h;
  h.version = r.u32("version");
  if (h.version != kCheckpointVersion) {
    throw ParseError(ParseErrorKind::bad_magic,
                     "checkpoint: unsupported version " + std::to_string(h.version));
  }
  h.kind = kind_from_u32(r.u32("model kind"));
  h.config_json = r.text(r.u32("config length"), "config");
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = r.u32("name length");
    if (name_len == 0 || name_len > kMaxNameBytes) {
      throw ParseError(ParseErrorKind::overflow, "checkpoint: bad tensor name length");
    }
    std::string name = r.text(name_len, "tensor name");
    const std::uint32_t rank = r.u32("rank");
    if (rank < 1 || rank > 2) {
      throw ParseError(ParseErrorKind::overflow,
                       "checkpoint: tensor '" + name + "' has unsupported rank " + std::to_string(rank));
    }
    numerics::Shape shape;
    std::uint64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint32_t dim = r.u32("dims");
      if (dim == 0) throw ParseError(ParseErrorKind::overflow, "checkpoint: zero dimension");
      shape.push_back(dim);
      numel *= dim;
    }
    if (numel > r.remaining() / 4) {
      throw ParseError(ParseErrorKind::truncated, "checkpoint: tensor '" + name + "' truncated");
    }
    if (payload) {
      std::vector<float> values(numel);
      for (auto& v : values) {
        v = r.f32();
        if (!std::isfinite(v)) {
          throw ParseError(ParseErrorKind::non_finite,
                           "checkpoint: tensor '" + name + "' has non-finite values");
        }
      }
      try {
        payload->add(name, numerics::Tensor<float>(shape, std::move(values)));
      } catch (const std::invalid_argument& e) {
        throw ParseError(ParseErrorKind::overflow, std::string("checkpoint: ") + e.what());
      }
    } else {
      r.text(numel * 4, "tensor payload");
    }
    h.tensors.emplace_back(std::move(name), std::move(shape));
  }
  if (r.remaining() != 0) {
    throw ParseError(ParseErrorKind::trailing_bytes, "checkpoint: trailing bytes after tensors");
  }
  return h;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(ParseErrorKind::io, "cannot open checkpoint " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

const char* to_string(ModelKind kind) { return kind == ModelKind::mdat ? "mdat" : "baseline"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "mdat") return ModelKind::mdat;
  if (s == "baseline") return ModelKind::baseline;
  throw std::invalid_argument("unknown model kind '" + s + "' (expected mdat or baseline)");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.kind));
  put_u32(out, checked_u32(ckpt.config_json.size(), "config"));
  out += ckpt.config_json;
  put_u32(out, checked_u32(ckpt.params.size(), "tensor count"));
  for (const auto& [name, tensor] : ckpt.params) {
    put_u32(out, checked_u32(name.size(), "tensor name"));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (auto d : tensor.shape()) put_u32(out, checked_u32(d, "dimension"));
    for (float v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Checkpoint ckpt;
  CheckpointHeader h = parse(bytes, &ckpt.params);
  ckpt.kind = h.kind;
  ckpt.config_json = std::move(h.config_json);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError(ParseErrorKind::io, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParseError(ParseErrorKind::io, "write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(slurp(path));
  } catch (const ParseError& e) {
    if (e.kind() == ParseErrorKind::io) throw;
    throw ParseError(e.kind(), path.string() + ": " + e.what());
  }
}

CheckpointHeader inspect_checkpoint(const std::filesystem::path& path) {
  try {
    return parse(slurp(path), nullptr);
  } catch (const ParseError& e) {
    if (e.kind() == ParseErrorKind::io) throw;
    throw ParseError(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace mdat::model
