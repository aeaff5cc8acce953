#pragma once

// Binary dump of a PreparedSubset so repeated runs skip parsing and windowing.
//
// Layout (host byte order):
//   char[8]  magic "SRULWIN\0"
//   u32      format version (kCacheVersion)
//   u64      source digest (raw files + window + columns)
//   string   subset name (u64 length + bytes)
//   u64      T, F; f64 r_early; u64 column count + u64 columns
//   f64[F]   norm min, f64[F] norm max
//   dataset  train, then test: u64 N, f64[N*T*F] samples, f64[N] targets,
//            i32[N] units, i32[N] end cycles
//   u64      discarded train, discarded test

#include <cstdint>
#include <filesystem>
#include <optional>

#include "steinrul/data.hpp"

namespace steinrul {

inline constexpr std::uint32_t kCacheVersion = 1;

/// FNV-1a over the three raw files of the subset plus the window settings.
std::uint64_t source_digest(const std::filesystem::path& data_dir, const SubsetConfig& config);

void save_prepared(const std::filesystem::path& file, const PreparedSubset& prepared,
                   std::uint64_t digest);

/// nullopt when the file is missing, has another version, or another digest.
/// Throws DataError when the file is truncated or corrupt.
std::optional<PreparedSubset> load_prepared(const std::filesystem::path& file,
                                            std::uint64_t digest);

/// Loads from cache_dir when valid, otherwise prepares from data_dir and
/// writes the cache. cache_dir may be empty to disable caching.
PreparedSubset load_or_prepare(const std::filesystem::path& data_dir,
                               const std::filesystem::path& cache_dir,
                               const SubsetConfig& config, bool* cache_hit = nullptr);

}  // namespace steinrul
