#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ewod/adapters/adapter.hpp"

namespace ewod::adapters {

/// On-disk adapter container (".lad"). Layers keep their write order; the
/// sample counter and task index are shared by all layers of a checkpoint.
struct AdapterFile {
  std::uint8_t dtype = 1;  // 0 = f32, 1 = f64
  std::uint64_t n_cumulative = 0;
  std::uint32_t task_index = 1;
  std::vector<std::pair<std::string, AdapterState>> layers;
};

/// Serializes to the little-endian container layout:
/// "LADP", u16 version(=1), u8 dtype, u32 layer count, u64 cumulative
/// sample count, u32 task index; per layer: u16 name length, name bytes,
/// u32 d_out, u32 d_in, u32 r, then row-major B, A for the aggregate delta
/// followed by B, A for the task delta.
std::vector<std::uint8_t> encode_lad(const AdapterFile& file);
AdapterFile decode_lad(std::span<const std::uint8_t> bytes);

void write_lad(const std::filesystem::path& path, const AdapterFile& file);
AdapterFile read_lad(const std::filesystem::path& path);

}  // namespace ewod::adapters
