#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace vuldat {

/// Reads a whole file. Throws IoError.
std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling then renames, so readers never observe a
/// half-written file. Throws IoError.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// 64-bit FNV-1a. Stable across platforms; used for content fingerprints and
/// the test-hash embedder.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

}  // namespace vuldat
