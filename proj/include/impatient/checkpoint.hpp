#pragma once

// Checkpoint layout (all integers little-endian):
//
//   offset 0   8 bytes  magic "IMPNCKPT"
//   offset 8   u32      format version (currently 1)
//   offset 12  u32      reserved, 0
//   offset 16  u64      manifest length M in bytes
//   offset 24  M bytes  manifest, UTF-8 JSON
//   offset 24+M         parameter block: float32 values of every tensor in
//                       manifest order, little-endian, no padding
//
// The manifest records the architecture, the tensor list (name, shape,
// dtype "f32", element offset into the block) and optional input
// normalization statistics.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "impatient/net.hpp"

namespace impatient {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Per-channel input normalization (mean / stddev of the training split).
struct Normalization {
  std::vector<float> mean;
  std::vector<float> stddev;

  bool operator==(const Normalization&) const = default;
};

struct Checkpoint {
  ImpatientNet net;
  std::optional<Normalization> normalization;
};

std::string encode_checkpoint(ImpatientNet& net, const std::optional<Normalization>& norm);
/// Throws IoError on malformed bytes and ConfigError when `expected` is given
/// and the stored architecture or tensor shapes differ from it.
Checkpoint decode_checkpoint(const std::string& bytes,
                             const std::optional<Architecture>& expected = std::nullopt);

void save_checkpoint(const std::string& path, ImpatientNet& net,
                     const std::optional<Normalization>& norm);
Checkpoint load_checkpoint(const std::string& path,
                           const std::optional<Architecture>& expected = std::nullopt);

}  // namespace impatient
