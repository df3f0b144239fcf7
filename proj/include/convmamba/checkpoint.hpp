#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "convmamba/model.hpp"

namespace convmamba {

// Layout: "CMNV1", then per tensor in VisitParams order:
//   u64 name length, UTF-8 name, u64 rank, rank x u64 dims, f64 values
// All integers and floats little-endian; values row-major.
inline constexpr char kCheckpointMagic[] = "CMNV1";

std::vector<std::uint8_t> EncodeCheckpoint(const ModelParams& params);

// Decodes into the layout InitModel(config) produces; any unknown magic,
// missing or extra tensor, name or shape mismatch is a format error.
ModelParams DecodeCheckpoint(std::span<const std::uint8_t> bytes,
                             const ModelConfig& config);

void SaveCheckpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams LoadCheckpoint(const std::filesystem::path& path,
                           const ModelConfig& config);

}  // namespace convmamba
