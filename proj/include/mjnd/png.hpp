#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mjnd {

/// 8-bit image with 1 (gray) or 3 (RGB) interleaved channels.
struct RasterImage {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;
};

void write_png(const std::filesystem::path& file, const RasterImage& img);
RasterImage read_png(const std::filesystem::path& file);

}  // namespace mjnd
