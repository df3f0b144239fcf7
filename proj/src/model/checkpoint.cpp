#include "convmamba/checkpoint.hpp"

#include <string_view>

#include "convmamba/binary_io.hpp"
#include "convmamba/error.hpp"

namespace convmamba {

std::vector<std::uint8_t> EncodeCheckpoint(const ModelParams& params) {
  ByteWriter w;
  w.PutBytes(std::string_view(kCheckpointMagic, 5));
  VisitParams(params, [&](const std::string& name, const Tensor& t, bool) {
    w.PutU64(name.size());
    w.PutBytes(name);
    w.PutU64(t.rank());
    for (std::size_t d : t.shape()) w.PutU64(d);
    for (double v : t.data()) w.PutF64(v);
  });
  return w.Take();
}

ModelParams DecodeCheckpoint(std::span<const std::uint8_t> bytes,
                             const ModelConfig& config) {
  ByteReader r(bytes);
  if (r.remaining() < 5 || r.Bytes(5, "magic") != std::string_view(kCheckpointMagic, 5)) {
    FailAtOffset(ErrorKind::kFormat, "not a CMNV1 checkpoint", 0);
  }
  // The template fixes names, order and shapes; its values are overwritten.
  Rng rng(0);
  ModelParams params = InitModel(config, rng);
  VisitParams(params, [&](const std::string& name, Tensor& t, bool) {
    const std::size_t at = r.offset();
    const std::uint64_t name_len = r.U64("name length");
    if (name_len > r.remaining()) FailAtOffset(ErrorKind::kFormat, "name length overruns file", at);
    const std::string_view got = r.Bytes(name_len, "name");
    if (got != name) {
      FailAtOffset(ErrorKind::kFormat,
                   "expected tensor '" + name + "', found '" + std::string(got) + "'", at);
    }
    const std::uint64_t rank = r.U64("rank");
    if (rank != t.rank()) {
      FailAtOffset(ErrorKind::kFormat, "rank mismatch for '" + name + "'", at);
    }
    Shape shape(rank);
    for (auto& d : shape) d = r.U64("dimension");
    if (shape != t.shape()) {
      FailAtOffset(ErrorKind::kFormat,
                   "shape " + ShapeString(shape) + " for '" + name +
                       "' does not match config shape " + ShapeString(t.shape()),
                   at);
    }
    r.Need(8 * t.numel(), "tensor values");
    for (double& v : t.data()) v = r.F64("value");
  });
  if (!r.AtEnd()) FailAtOffset(ErrorKind::kFormat, "trailing bytes after last tensor", r.offset());
  return params;
}

void SaveCheckpoint(const std::filesystem::path& path, const ModelParams& params) {
  WriteFileBytes(path, EncodeCheckpoint(params));
}

ModelParams LoadCheckpoint(const std::filesystem::path& path,
                           const ModelConfig& config) {
  const auto bytes = ReadFileBytes(path);
  return DecodeCheckpoint(bytes, config);
}

}  // namespace convmamba
