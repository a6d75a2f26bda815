#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "ssc/network.hpp"

namespace ssc {

/// Binary little-endian checkpoint:
///
///   "SSCK" | version u32 | layer count u32 | input rank u32 | input extents u32[rank]
///   per layer: name length u32 | UTF-8 name | kind u8 | hyperparams | param count u32
///              per param: rank u32 | extents u32[rank] | f64 values (row-major)
///   CRC-32 (zlib polynomial) of every preceding byte, u32
///
/// Hyperparameter blocks (all u32): dense: units; conv2d: out_channels,
/// kernel, stride, padding; maxpool2d: window, stride; relu and flatten: none.
/// Param order is weights then bias.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_checkpoint(const Network& net);
Network decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Standalone tensor file: "SSCT" | version u32 | tensor block | CRC-32.
/// The tensor block is the checkpoint's per-param layout.
void save_tensor(const Tensor& t, const std::filesystem::path& path);
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace ssc
