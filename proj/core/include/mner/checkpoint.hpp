#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mner/nn.hpp"
#include "mner/tensor.hpp"

namespace mner {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout (little-endian):
//   "2MNER1\n" | u32 version | u32 count |
//   count x { u32 name_len | name | u32 rank | u64 dims[rank] | f32 values[] } |
//   u64 FNV-1a of every byte after the version field
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

std::vector<char> encode_checkpoint(const ParameterList& params);
// Throws ParseError on bad magic, version, truncation or checksum.
std::vector<CheckpointEntry> decode_checkpoint(const std::vector<char>& bytes, const std::string& source = "<bytes>");

void save_checkpoint(const std::filesystem::path& path, const ParameterList& params);
std::vector<CheckpointEntry> load_checkpoint(const std::filesystem::path& path);

// Copies values into `params`, matching by name. Every parameter must be
// present with the same shape; throws ConfigError otherwise.
void apply_checkpoint(const std::vector<CheckpointEntry>& entries, const ParameterList& params);

std::uint64_t fnv1a64(const char* data, std::size_t size);

}  // namespace mner
