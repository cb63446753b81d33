#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace simpipe::fsutil {

/// Writes to a hidden sibling `.name.partial` and renames into place, so
/// directory watchers never observe a half-written file under its final name.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void atomic_write(const std::filesystem::path& path, std::string_view text);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// FNV-1a 64-bit digest, used for output inventories.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;
std::string hex64(std::uint64_t v);

} // namespace simpipe::fsutil
