#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace mjnd {

inline constexpr int kImageSize = 32;
inline constexpr int kChannels = 3;
inline constexpr int kNumClasses = 10;
inline constexpr std::size_t kPixelsPerImage = kImageSize * kImageSize;
inline constexpr std::size_t kValuesPerImage = kPixelsPerImage * kChannels;

/// Records per CIFAR-10 batch file and bytes per record (label + CHW planes).
inline constexpr std::size_t kRecordsPerBatchFile = 10000;
inline constexpr std::size_t kRecordBytes = 1 + kValuesPerImage;

/// 8-bit RGB image stored row-major, interleaved (H x W x 3).
struct PixelImage {
  int height = kImageSize;
  int width = kImageSize;
  std::vector<std::uint8_t> pixels;
  /// Human annotation; carried for bookkeeping, never used as ground truth.
  int class_index = 0;
  /// Position of the record in its split (train ids run 0..49999 across the
  /// five batch files).
  std::uint32_t id = 0;

  std::uint8_t& at(int h, int w, int c) {
    return pixels[(static_cast<std::size_t>(h) * width + w) * kChannels + c];
  }
  std::uint8_t at(int h, int w, int c) const {
    return pixels[(static_cast<std::size_t>(h) * width + w) * kChannels + c];
  }

  friend bool operator==(const PixelImage&, const PixelImage&) = default;
};

/// Normalized image in model space. Values are channel-planar (C x H x W),
/// the layout the networks consume.
struct ImageTensor {
  int height = kImageSize;
  int width = kImageSize;
  std::vector<float> values;
  std::uint32_t id = 0;
  bool augmented = false;

  float& at(int h, int w, int c) {
    return values[(static_cast<std::size_t>(c) * height + h) * width + w];
  }
  float at(int h, int w, int c) const {
    return values[(static_cast<std::size_t>(c) * height + h) * width + w];
  }
};

enum class SplitName { kTrain, kTest };

std::string_view split_label(SplitName split);
SplitName parse_split(std::string_view text);

struct DatasetSplit {
  std::vector<PixelImage> records;
  SplitName split = SplitName::kTrain;
  double subset_fraction = 1.0;

  std::size_t size() const noexcept { return records.size(); }
  /// Digest over record ids, labels and pixels, in order.
  std::uint64_t digest() const;
};

/// Reads the standard CIFAR-10 binary layout (data_batch_1..5.bin,
/// test_batch.bin) from `root` or `root/cifar-10-batches-bin`. With
/// subset_fraction < 1 the result holds floor(fraction * N) records spread
/// evenly over the classes (remainder to the lowest class indices), chosen by
/// `seed` and returned in ascending id order.
DatasetSplit load_dataset(const std::filesystem::path& root, SplitName split,
                          double subset_fraction, std::uint64_t seed);

/// Stratified selection over an already-loaded record list. Exposed for the
/// loader and for tests that count per-class picks.
std::vector<std::size_t> stratified_subset(std::span<const PixelImage> records,
                                           std::size_t target,
                                           std::uint64_t seed);

PixelImage mirror_horizontal(const PixelImage& img);

/// Mirrors with probability p. p must lie in [0,1].
PixelImage augment_flip(const PixelImage& img, double p, std::mt19937_64& rng);

/// [0,255] -> [0,1] -> (v - 0.5) / 0.5, per channel.
ImageTensor normalize(const PixelImage& img);

/// Real-valued inverse of normalize on the 8-bit scale, no rounding.
std::vector<float> to_pixel_scale(const ImageTensor& t);

/// Inverse of normalize with rounding to the nearest level. With `clip`,
/// values outside [0,255] are clamped first; without it an out-of-range
/// value is an ArgumentError.
PixelImage denormalize(const ImageTensor& t, bool clip);

inline float normalize_value(std::uint8_t v) {
  return (static_cast<float>(v) / 255.0f - 0.5f) / 0.5f;
}

inline float denormalize_value(float v) { return (v * 0.5f + 0.5f) * 255.0f; }

}  // namespace mjnd
