#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace moelab::experiment {

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::uint64_t file_digest(const std::filesystem::path& path);
std::string hex_digest(std::uint64_t digest);

}  // namespace moelab::experiment
