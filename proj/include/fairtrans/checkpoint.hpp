#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fairtrans/params.hpp"

namespace fairtrans {

// Versioned binary tensor container. Layout: magic "FTNS", format version
// (u32), entry count (u32), then per entry: name length (u32) + UTF-8 name,
// rank (u32), dims (u64 each), raw little-endian 64-bit floats. Values
// round-trip bit-exactly.

inline constexpr uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  std::vector<size_t> dims;
  std::vector<double> values;
};

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<CheckpointEntry>& entries);

std::vector<CheckpointEntry> read_checkpoint(const std::filesystem::path& path);

// ParameterSet bridging: entry names are "<prefix><param name>".
std::vector<CheckpointEntry> checkpoint_entries(const ParameterSet& ps, const std::string& prefix);
void load_checkpoint_entries(ParameterSet& ps, const std::vector<CheckpointEntry>& entries,
                             const std::string& prefix);

}  // namespace fairtrans
