#include "mjnd/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "mjnd/data.hpp"
#include "mjnd/errors.hpp"

namespace mjnd {
namespace {

namespace fs = std::filesystem;

using Rgb = std::array<float, 3>;

bool inside(int shape, float dx, float dy, float r) {
  const float ax = std::abs(dx);
  const float ay = std::abs(dy);
  const float cheb = std::max(ax, ay);
  const float d2 = dx * dx + dy * dy;
  switch (shape) {
    case 0: return d2 <= r * r;
    case 1: return d2 <= r * r && d2 >= 0.36f * r * r;
    case 2: return cheb <= 0.85f * r;
    case 3: return cheb <= 0.85f * r && cheb >= 0.45f * r;
    case 4: return dy >= -r && dy <= 0.8f * r && ax <= 0.55f * (dy + r);
    case 5: return ax + ay <= r;
    case 6: return (ax <= 0.3f * r && ay <= r) || (ay <= 0.3f * r && ax <= r);
    case 7: return cheb <= r && std::abs(ax - ay) <= 0.3f * r;
    case 8: return cheb <= 0.9f * r && static_cast<int>(std::floor((dy + r) / (0.4f * r))) % 2 == 0;
    case 9: return cheb <= 0.9f * r && static_cast<int>(std::floor((dx + r) / (0.4f * r))) % 2 == 0;
    default: return false;
  }
}

float luminance(const Rgb& c) { return 0.299f * c[0] + 0.587f * c[1] + 0.114f * c[2]; }

std::vector<std::uint8_t> render_record(int shape, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  std::normal_distribution<float> grain(0.0f, 6.0f);

  Rgb bg{}, fg{};
  do {
    for (auto& v : bg) v = 255.0f * unit(rng);
    for (auto& v : fg) v = 255.0f * unit(rng);
  } while (std::abs(luminance(bg) - luminance(fg)) < 60.0f);

  const float angle = 6.2831853f * unit(rng);
  const float slope = 40.0f * unit(rng);
  const float gx = std::cos(angle) * slope / kImageSize;
  const float gy = std::sin(angle) * slope / kImageSize;
  const float cx = 10.0f + 12.0f * unit(rng);
  const float cy = 10.0f + 12.0f * unit(rng);
  const float radius = 6.5f + 4.5f * unit(rng);

  std::vector<std::uint8_t> record(kRecordBytes);
  record[0] = static_cast<std::uint8_t>(shape);
  for (int h = 0; h < kImageSize; ++h) {
    for (int w = 0; w < kImageSize; ++w) {
      const float dx = static_cast<float>(w) + 0.5f - cx;
      const float dy = static_cast<float>(h) + 0.5f - cy;
      const bool on = inside(shape, dx, dy, radius);
      const float shade = gx * (w - kImageSize / 2) + gy * (h - kImageSize / 2);
      for (int c = 0; c < kChannels; ++c) {
        const float base = on ? fg[c] : bg[c] + shade;
        const float v = std::clamp(base + grain(rng), 0.0f, 255.0f);
        record[1 + c * kPixelsPerImage + h * kImageSize + w] =
            static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return record;
}

void write_file(const fs::path& file, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  for (std::size_t r = 0; r < kRecordsPerBatchFile; ++r) {
    const auto record = render_record(static_cast<int>(r % kNumClasses), rng);
    out.write(reinterpret_cast<const char*>(record.data()), static_cast<std::streamsize>(record.size()));
  }
  if (!out) throw IoError("short write to " + file.string());
}

std::vector<std::string> archive_names() {
  return {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
          "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"};
}

}  // namespace

bool archive_complete(const fs::path& dir) {
  std::error_code ec;
  for (const auto& name : archive_names()) {
    const auto file = dir / name;
    if (!fs::is_regular_file(file, ec) ||
        fs::file_size(file, ec) != kRecordsPerBatchFile * kRecordBytes) {
      return false;
    }
  }
  return true;
}

void write_synthetic_archive(const fs::path& dir, std::uint64_t seed) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const auto names = archive_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    write_file(dir / names[i], seed * 1000003ULL + i);
  }
}

}  // namespace mjnd
