#pragma once

#include <filesystem>
#include <string>

#include "iconann/nn/params.hpp"
#include "json.hpp"

namespace iconann {

/// Single-file model archive.
///
/// Layout (all integers little-endian):
///   bytes 0..7    magic "ICONCKPT"
///   bytes 8..11   uint32 format version (currently 1)
///   bytes 12..19  uint64 header length N
///   next N bytes  UTF-8 JSON header:
///                   {"format_version": 1, "model_type": str, "config": {...},
///                    "extra": {...}, "payload_fnv1a64": str,
///                    "tensors": [{"name": str, "shape": [int...], "offset": int, "count": int}]}
///   remainder     float32 tensor payload; offsets and counts are in elements
///
/// Readers reject unknown magic, newer versions, size mismatches and checksum failures
/// with CheckpointError.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string model_type;
  nlohmann::json config;
  nlohmann::json extra = nlohmann::json::object();
  nn::ParamSet<float> params;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace iconann
