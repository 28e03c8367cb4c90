#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace mjnd {

inline constexpr std::uint32_t kContainerVersion = 1;

/// On-disk artifact: 8-byte magic, u32 format version, u64 header length,
/// UTF-8 JSON header, then an opaque payload to end of file.
struct Container {
  nlohmann::json header;
  std::string payload;
};

/// Writes atomically via a sibling temp file.
void write_container(const std::filesystem::path& file, std::string_view magic,
                     const Container& c);

/// Throws IoError on a missing file, wrong magic or unsupported version.
Container read_container(const std::filesystem::path& file, std::string_view magic);

/// Same as read_container but returns only the header.
nlohmann::json read_container_header(const std::filesystem::path& file, std::string_view magic);

}  // namespace mjnd
