#pragma once

#include <cstdint>
#include <filesystem>

#include "lckd/backbone.hpp"

namespace lckd {

struct CheckpointMeta {
  ModelConfig model;
  std::int64_t iteration = 0;
  std::uint64_t split_seed = 0;
  double validation_fraction = 0.2;
};

struct Checkpoint {
  CheckpointMeta meta;
  ModelParams<float> params;
};

/// Layout (all integers little-endian):
///   "LCKDCKPT" | u32 version | u32 header bytes | header JSON
///   | u32 tensor count | per tensor: u32 name bytes, name, u32 rank, u32 dims[rank], f32 payload
///   | u32 CRC-32 of everything before it
void save_checkpoint(const std::filesystem::path& path, const Architecture& arch,
                     const ModelParams<float>& params, const CheckpointMeta& meta);

/// Throws DataError when the file is missing, truncated, fails its CRC, or its
/// registry does not match the architecture its header describes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lckd
