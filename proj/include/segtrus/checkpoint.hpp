#ifndef SEGTRUS_CHECKPOINT_HPP_
#define SEGTRUS_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>

#include "segtrus/model.hpp"

namespace segtrus {

// Serialized network state: config JSON, ordered parameter tensors, BN
// running statistics, epoch counter. Gradients/momentum are not stored.
struct Checkpoint {
  NetworkConfig config;
  ParamStore params;
  std::uint64_t epoch = 0;
};

// File layout: "VR19" magic, u32 version, payload, u32 CRC32 of the payload.
// All scalars little-endian, dims 64-bit.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace segtrus

#endif  // SEGTRUS_CHECKPOINT_HPP_
