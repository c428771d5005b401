#pragma once

#include <cstdint>
#include <string>

#include "ldmres/network.hpp"

namespace ldmres {

// Binary weight file, bit-exact and platform-independent:
//
//   "LDMR"                                  4 bytes
//   version                                 u32 LE (currently 1)
//   in_channels, num_classes, stem_width,
//   stage_width_1..3                        u32 LE each
//   per tensor, in parameter-store order:
//     name length                           u32 LE
//     name bytes
//     rank (always 4)                       u32 LE
//     dims                                  u32 LE x rank
//     payload                               f32 LE x prod(dims)
//   crc32 of all preceding bytes            u32 LE
//
// The total size is known before writing and asserted after.

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const Network& net, const std::string& path);

// Rebuilds the network from the stored config and restores every tensor
// bit-for-bit. Throws ModelFileError with a specific status on bad magic,
// version mismatch, CRC failure, truncation, or malformed records.
Network load_model(const std::string& path);

// Exact on-disk size of a network's weight file, in bytes.
std::int64_t model_file_size(const Network& net);

}  // namespace ldmres
