#include "mjnd/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <string>

#include "mjnd/digest.hpp"
#include "mjnd/errors.hpp"

namespace mjnd {
namespace {

namespace fs = std::filesystem;

fs::path resolve_archive_dir(const fs::path& root) {
  if (fs::exists(root / "data_batch_1.bin") || fs::exists(root / "test_batch.bin")) {
    return root;
  }
  if (fs::exists(root / "cifar-10-batches-bin")) return root / "cifar-10-batches-bin";
  return root;
}

std::vector<fs::path> batch_files(const fs::path& dir, SplitName split) {
  if (split == SplitName::kTest) return {dir / "test_batch.bin"};
  std::vector<fs::path> files;
  for (int i = 1; i <= 5; ++i) files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
  return files;
}

void read_batch_file(const fs::path& file, std::uint32_t first_id, std::vector<PixelImage>& out) {
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) {
    throw IngestError("missing CIFAR-10 batch file: " + file.string());
  }
  const auto size = fs::file_size(file, ec);
  if (ec || size != kRecordsPerBatchFile * kRecordBytes) {
    throw IngestError("corrupt CIFAR-10 batch file (expected " +
                      std::to_string(kRecordsPerBatchFile * kRecordBytes) + " bytes): " +
                      file.string());
  }
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IngestError("cannot open CIFAR-10 batch file: " + file.string());

  std::vector<std::uint8_t> record(kRecordBytes);
  for (std::size_t r = 0; r < kRecordsPerBatchFile; ++r) {
    if (!in.read(reinterpret_cast<char*>(record.data()), kRecordBytes)) {
      throw IngestError("truncated CIFAR-10 batch file: " + file.string());
    }
    if (record[0] >= kNumClasses) {
      throw IngestError("corrupt CIFAR-10 batch file (label " + std::to_string(record[0]) +
                        " at record " + std::to_string(r) + "): " + file.string());
    }
    PixelImage img;
    img.class_index = record[0];
    img.id = first_id + static_cast<std::uint32_t>(r);
    img.pixels.resize(kValuesPerImage);
    // On disk: 1024 R, 1024 G, 1024 B, each row-major.
    for (int c = 0; c < kChannels; ++c) {
      const std::uint8_t* plane = record.data() + 1 + c * kPixelsPerImage;
      for (std::size_t p = 0; p < kPixelsPerImage; ++p) img.pixels[p * kChannels + c] = plane[p];
    }
    out.push_back(std::move(img));
  }
}

}  // namespace

std::string_view split_label(SplitName split) {
  return split == SplitName::kTrain ? "train" : "test";
}

SplitName parse_split(std::string_view text) {
  if (text == "train") return SplitName::kTrain;
  if (text == "test") return SplitName::kTest;
  throw ArgumentError("unknown split '" + std::string(text) + "' (expected train|test)");
}

std::uint64_t DatasetSplit::digest() const {
  Fnv1a h;
  h.update(split_label(split));
  for (const auto& r : records) {
    h.update_value(r.id);
    h.update_value(r.class_index);
    h.update(std::as_bytes(std::span(r.pixels)));
  }
  return h.value();
}

std::vector<std::size_t> stratified_subset(std::span<const PixelImage> records,
                                           std::size_t target, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_class[records[i].class_index].push_back(i);
  }
  const std::size_t base = target / kNumClasses;
  const std::size_t remainder = target % kNumClasses;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> picked;
  picked.reserve(target);
  for (int c = 0; c < kNumClasses; ++c) {
    const std::size_t want = base + (static_cast<std::size_t>(c) < remainder ? 1 : 0);
    auto& pool = by_class[c];
    if (pool.size() < want) {
      throw IngestError("class " + std::to_string(c) + " has " + std::to_string(pool.size()) +
                        " records, stratified subset needs " + std::to_string(want));
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    picked.insert(picked.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(want));
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

DatasetSplit load_dataset(const fs::path& root, SplitName split, double subset_fraction,
                          std::uint64_t seed) {
  if (!(subset_fraction > 0.0 && subset_fraction <= 1.0)) {
    throw ArgumentError("subset_fraction must lie in (0, 1], got " +
                        std::to_string(subset_fraction));
  }
  const fs::path dir = resolve_archive_dir(root);
  std::vector<PixelImage> all;
  std::uint32_t next_id = 0;
  for (const auto& file : batch_files(dir, split)) {
    all.reserve(all.size() + kRecordsPerBatchFile);
    read_batch_file(file, next_id, all);
    next_id += static_cast<std::uint32_t>(kRecordsPerBatchFile);
  }

  DatasetSplit out;
  out.split = split;
  out.subset_fraction = subset_fraction;
  if (subset_fraction == 1.0) {
    out.records = std::move(all);
    return out;
  }
  const auto target =
      static_cast<std::size_t>(std::floor(subset_fraction * static_cast<double>(all.size()) + 1e-9));
  const auto picked = stratified_subset(all, target, seed);
  out.records.reserve(picked.size());
  for (std::size_t i : picked) out.records.push_back(std::move(all[i]));
  return out;
}

PixelImage mirror_horizontal(const PixelImage& img) {
  PixelImage out = img;
  for (int h = 0; h < img.height; ++h) {
    for (int w = 0; w < img.width; ++w) {
      for (int c = 0; c < kChannels; ++c) out.at(h, w, c) = img.at(h, img.width - 1 - w, c);
    }
  }
  return out;
}

PixelImage augment_flip(const PixelImage& img, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("flip probability must lie in [0, 1]");
  std::bernoulli_distribution coin(p);
  return coin(rng) ? mirror_horizontal(img) : img;
}

ImageTensor normalize(const PixelImage& img) {
  ImageTensor t;
  t.height = img.height;
  t.width = img.width;
  t.id = img.id;
  t.values.resize(static_cast<std::size_t>(img.height) * img.width * kChannels);
  for (int h = 0; h < img.height; ++h) {
    for (int w = 0; w < img.width; ++w) {
      for (int c = 0; c < kChannels; ++c) t.at(h, w, c) = normalize_value(img.at(h, w, c));
    }
  }
  return t;
}

std::vector<float> to_pixel_scale(const ImageTensor& t) {
  std::vector<float> out(t.values.size());
  std::transform(t.values.begin(), t.values.end(), out.begin(), denormalize_value);
  return out;
}

PixelImage denormalize(const ImageTensor& t, bool clip) {
  PixelImage img;
  img.height = t.height;
  img.width = t.width;
  img.id = t.id;
  img.pixels.resize(static_cast<std::size_t>(t.height) * t.width * kChannels);
  for (int h = 0; h < t.height; ++h) {
    for (int w = 0; w < t.width; ++w) {
      for (int c = 0; c < kChannels; ++c) {
        float v = denormalize_value(t.at(h, w, c));
        if (clip) {
          v = std::clamp(v, 0.0f, 255.0f);
        } else if (v < -0.5f || v >= 255.5f) {
          throw ArgumentError("value " + std::to_string(v) +
                              " outside the 8-bit range; denormalize with clip");
        }
        img.at(h, w, c) = static_cast<std::uint8_t>(std::lround(v));
      }
    }
  }
  return img;
}

}  // namespace mjnd
