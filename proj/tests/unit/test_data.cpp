#include <doctest.h>

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "mjnd/data.hpp"
#include "mjnd/errors.hpp"
#include "mjnd/synthetic.hpp"
#include "test_support.hpp"

using namespace mjnd;

namespace {

PixelImage random_image(std::mt19937_64& rng) {
  PixelImage img;
  img.pixels.resize(kValuesPerImage);
  std::uniform_int_distribution<int> level(0, 255);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(level(rng));
  return img;
}

std::array<int, kNumClasses> class_counts(const DatasetSplit& s) {
  std::array<int, kNumClasses> counts{};
  for (const auto& r : s.records) ++counts[r.class_index];
  return counts;
}

}  // namespace

TEST_CASE("full splits hold 50000 and 10000 records") {
  const auto& root = test::shared_archive();
  const auto train = load_dataset(root, SplitName::kTrain, 1.0, 0);
  const auto test = load_dataset(root, SplitName::kTest, 1.0, 0);
  CHECK(train.size() == 50000);
  CHECK(test.size() == 10000);
  CHECK(train.records.front().id == 0);
  CHECK(train.records.back().id == 49999);
  CHECK(test.records.back().id == 9999);
}

TEST_CASE("stratified 10 percent subset is balanced and reproducible") {
  const auto& root = test::shared_archive();
  const auto a = load_dataset(root, SplitName::kTrain, 0.1, 7);
  const auto b = load_dataset(root, SplitName::kTrain, 0.1, 7);
  REQUIRE(a.size() == 5000);
  for (int c : class_counts(a)) CHECK(c == 500);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.records[i].id == b.records[i].id);
  CHECK(a.digest() == b.digest());
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a.records[i - 1].id < a.records[i].id);

  const auto other = load_dataset(root, SplitName::kTrain, 0.1, 8);
  CHECK(other.digest() != a.digest());
}

TEST_CASE("stratified remainder goes to the lowest classes") {
  std::vector<PixelImage> records(200);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].class_index = static_cast<int>(i % kNumClasses);
    records[i].id = static_cast<std::uint32_t>(i);
  }
  const auto picked = stratified_subset(records, 23, 1);
  REQUIRE(picked.size() == 23);
  std::array<int, kNumClasses> counts{};
  for (auto i : picked) ++counts[records[i].class_index];
  for (int c = 0; c < kNumClasses; ++c) CHECK(counts[c] == (c < 3 ? 3 : 2));
  CHECK(std::set<std::size_t>(picked.begin(), picked.end()).size() == picked.size());
}

TEST_CASE("loader rejects bad fractions and malformed archives") {
  const auto& root = test::shared_archive();
  CHECK_THROWS_AS(load_dataset(root, SplitName::kTrain, 0.0, 0), ArgumentError);
  CHECK_THROWS_AS(load_dataset(root, SplitName::kTrain, 1.5, 0), ArgumentError);

  test::TempDir dir("mjnd-bad");
  CHECK_THROWS_AS(load_dataset(dir.path(), SplitName::kTest, 1.0, 0), IngestError);
  {
    std::ofstream out(dir.path() / "test_batch.bin", std::ios::binary);
    out << "short";
  }
  try {
    load_dataset(dir.path(), SplitName::kTest, 1.0, 0);
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(std::string(e.what()).find("test_batch.bin") != std::string::npos);
  }
  {
    std::ofstream out(dir.path() / "test_batch.bin", std::ios::binary);
    std::string record(kRecordBytes, '\0');
    record[0] = static_cast<char>(11);
    for (std::size_t i = 0; i < kRecordsPerBatchFile; ++i) out << record;
  }
  CHECK_THROWS_AS(load_dataset(dir.path(), SplitName::kTest, 1.0, 0), IngestError);
}

TEST_CASE("loader accepts the cifar-10-batches-bin subdirectory") {
  test::TempDir dir("mjnd-nested");
  std::filesystem::create_directory_symlink(test::shared_archive(), dir.path() / "cifar-10-batches-bin");
  CHECK(load_dataset(dir.path(), SplitName::kTest, 0.01, 0).size() == 100);
}

TEST_CASE("synthetic archive is deterministic and complete") {
  test::TempDir a("mjnd-synth-a");
  CHECK_FALSE(archive_complete(a.path()));
  write_synthetic_archive(a.path(), 3);
  CHECK(archive_complete(a.path()));
  const auto x = load_dataset(a.path(), SplitName::kTest, 1.0, 0);
  const auto y = load_dataset(test::shared_archive(), SplitName::kTest, 1.0, 0);
  CHECK(x.digest() == y.digest());
  for (int c : class_counts(x)) CHECK(c == 1000);
}

TEST_CASE("augment_flip identity, involution and rate") {
  std::mt19937_64 rng(5);
  const PixelImage img = random_image(rng);
  CHECK(augment_flip(img, 0.0, rng) == img);
  CHECK(augment_flip(augment_flip(img, 1.0, rng), 1.0, rng) == img);
  CHECK(augment_flip(img, 1.0, rng) == mirror_horizontal(img));
  CHECK_THROWS_AS(augment_flip(img, 1.5, rng), ArgumentError);
  CHECK_THROWS_AS(augment_flip(img, -0.1, rng), ArgumentError);

  // Binomial(10000, 0.5): sigma = 50.
  PixelImage asym;
  asym.pixels.assign(kValuesPerImage, 0);
  asym.at(0, 0, 0) = 255;
  int flips = 0;
  std::mt19937_64 draws(11);
  for (int i = 0; i < 10000; ++i) flips += augment_flip(asym, 0.5, draws).at(0, 0, 0) == 0 ? 1 : 0;
  CHECK(std::abs(flips - 5000) <= 150);
}

TEST_CASE("normalize boundaries and layout") {
  PixelImage img;
  img.pixels.assign(kValuesPerImage, 0);
  img.at(0, 0, 0) = 255;
  img.at(0, 1, 0) = 64;
  img.at(2, 3, 1) = 200;
  img.id = 42;
  const ImageTensor t = normalize(img);
  CHECK(t.id == 42);
  CHECK(t.values.size() == kValuesPerImage);
  CHECK(t.at(0, 0, 0) == doctest::Approx(1.0));
  CHECK(t.at(1, 1, 2) == doctest::Approx(-1.0));
  CHECK(t.at(0, 1, 0) == doctest::Approx((64.0 / 255.0 - 0.5) / 0.5).epsilon(1e-6));
  CHECK(t.at(0, 1, 0) == doctest::Approx(-0.4980).epsilon(1e-4));
  // Planar: channel 1 of pixel (2,3) lives in the second plane.
  CHECK(t.values[static_cast<std::size_t>(kPixelsPerImage) + 2 * kImageSize + 3] == doctest::Approx(normalize_value(200)));
}

TEST_CASE("denormalize round-trips every 8-bit level") {
  PixelImage img;
  img.pixels.resize(kValuesPerImage);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = static_cast<std::uint8_t>(i % 256);
  const ImageTensor t = normalize(img);
  CHECK(denormalize(t, false).pixels == img.pixels);
  const auto real = to_pixel_scale(t);
  for (std::size_t i = 0; i < real.size(); ++i) {
    // real is planar, pixels interleaved.
    const std::size_t c = i / kPixelsPerImage;
    const std::size_t p = i % kPixelsPerImage;
    CHECK(std::abs(real[i] - static_cast<double>(img.pixels[p * kChannels + c])) <= 1e-3);
  }
}

TEST_CASE("denormalize clip behaviour") {
  ImageTensor t;
  t.values.assign(kValuesPerImage, 0.0f);
  t.values[0] = 1.2f;
  t.values[1] = -1.3f;
  const PixelImage clipped = denormalize(t, true);
  CHECK(clipped.at(0, 0, 0) == 255);
  CHECK(clipped.at(0, 1, 0) == 0);
  CHECK_THROWS_AS(denormalize(t, false), ArgumentError);
}
