#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace fairtrans {

std::string str_format(const char* fmt, ...);

// Fixed two-decimal rendering used by every report table.
std::string format2(double v);

// FNV-1a 64-bit. Not cryptographic; used for manifests and dataset
// fingerprints where we only need change detection.
inline constexpr uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = kFnvOffset) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a_u64(uint64_t v, uint64_t h) { return fnv1a(&v, sizeof(v), h); }

uint64_t hash_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

// Writes to "<path>.tmp" then renames so readers never observe a torn file.
void atomic_write_file(const std::filesystem::path& path, const std::string& contents);

// RFC-4180: quote when the value contains a comma, quote or newline.
std::string csv_escape(const std::string& field);

// Splits one CSV record, honoring RFC-4180 quoting.
std::vector<std::string> split_csv_line(const std::string& line);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

}  // namespace fairtrans
