#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace cgnn {

inline constexpr const char* kToolVersion = "0.3.0";

// All randomness goes through mt19937_64 plus the helpers below so results
// do not depend on the standard library's distribution implementations.
using Rng = std::mt19937_64;

// Uniform integer in [0, n). n must be > 0.
inline uint64_t uniform_index(Rng& rng, uint64_t n) {
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
void seeded_shuffle(std::vector<T>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

uint64_t fnv1a64(std::string_view data);
std::string hex_digest(std::string_view data);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Digest of a file's bytes, formatted "fnv1a64:<16 hex digits>".
std::string file_digest(const std::filesystem::path& path);

// Glob over '/'-separated relative paths. "**" spans directories, "*" and
// "?" stay within one path segment.
bool glob_match(std::string_view pattern, std::string_view path);

// Relative paths (generic form, '/'-separated) of regular files under root
// that match any include glob and no exclude glob, sorted lexicographically.
std::vector<std::string> list_matching_files(
    const std::filesystem::path& root, const std::vector<std::string>& include,
    const std::vector<std::string>& exclude);

}  // namespace cgnn
