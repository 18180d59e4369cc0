#pragma once

// Binary checkpoint:
//   "W2GNCKPT" | u32 version | u64 iteration | u32 net count
//   per net: u32 name length, name bytes, u64 input_dim, u64 rank,
//            u64 width count, u64 widths..., f64 beta, f64 celu_alpha,
//            u64 parameter count, f64 parameters...
//   u64 FNV-1a hash of every preceding byte
// Integers and doubles are little-endian.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "w2gn/icnn/dense_icnn.hpp"

namespace w2gn::icnn {

inline constexpr std::uint32_t checkpoint_version = 1;

struct Checkpoint {
  std::uint64_t iteration = 0;
  std::vector<std::pair<std::string, DenseICNN>> nets;

  /// Throws ConfigError when no net has this name.
  const DenseICNN& net(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws IoError on unreadable, truncated, or corrupted files.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace w2gn::icnn
