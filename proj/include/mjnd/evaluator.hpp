#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "mjnd/cam.hpp"
#include "mjnd/classifiers.hpp"
#include "mjnd/generator.hpp"
#include "mjnd/metrics.hpp"
#include "mjnd/png.hpp"

namespace mjnd {

/// Produces the noise e for a batch of clean images. Arguments are the
/// normalized batch [B,3,32,32] and the record ids; result is [B,3,32,32].
using JndSource = std::function<torch::Tensor(const torch::Tensor& x, std::span<const std::uint32_t> ids)>;

/// e = E(x, c) from a generator in inference mode, with merged CAMs looked
/// up in the cache.
JndSource generator_source(GeneratorModel& g, const CamCache& cams);

/// Distorted labels M(S_n(x_hat)) for each classifier, [B] int64 each.
std::array<torch::Tensor, kNumClassifiers> predict_labels(std::span<ClassifierModel> classifiers,
                                                          const torch::Tensor& images);

/// RCA of a distorted batch against the reference labels of its ids.
RcaReport rca(std::span<ClassifierModel> classifiers, const torch::Tensor& distorted,
              std::span<const std::uint32_t> ids, const LabelSet& refs);

/// Per-image PSNR in dB between clean and distorted normalized batches, [B].
torch::Tensor psnr_batch(const torch::Tensor& x, const torch::Tensor& distorted);

struct JndEvaluation {
  RcaReport rca;
  double mean_psnr = 0.0;
  /// Mean of N0 = mean |e| per image.
  double mean_actual_level = 0.0;
  std::size_t count = 0;
};

/// RCA and mean PSNR of x + e over the selected records (all when `indices`
/// is empty) of a clean, unaugmented split.
JndEvaluation evaluate_jnd(std::span<ClassifierModel> classifiers, const JndSource& source,
                           const DatasetSplit& split, const LabelSet& refs,
                           std::span<const std::size_t> indices = {});

struct WgnReport {
  RcaReport jnd;
  RcaReport wgn;
  double mean_psnr_jnd = 0.0;
  double mean_psnr_wgn = 0.0;
};

/// Zero-mean Gaussian noise rescaled per image so its RMS equals the RMS of
/// that image's e. Noise for image `id` depends only on (seed, id).
torch::Tensor rms_matched_noise(const torch::Tensor& e, std::span<const std::uint32_t> ids, std::uint64_t seed);

WgnReport wgn_baseline(std::span<ClassifierModel> classifiers, const JndSource& source,
                       const DatasetSplit& split, const LabelSet& refs, std::uint64_t seed);

inline constexpr int kHomogeneitySteps = 9;

struct HomogeneityReport {
  /// Entry k holds the RCA of x + (k/9) e, k = 0..9.
  std::array<RcaReport, kHomogeneitySteps + 1> by_step{};
  static double fraction(int k) { return static_cast<double>(k) / kHomogeneitySteps; }
};

HomogeneityReport homogeneity_test(std::span<ClassifierModel> classifiers, const JndSource& source,
                                   const DatasetSplit& split, const LabelSet& refs);

/// Per-pixel noise magnitude on the least and most attended pixels. Deciles
/// are taken per image over the merged CAM; magnitudes are channel means of
/// |e|, averaged over the decile and then over images.
struct SpatialReport {
  double bottom_decile_mean = 0.0;
  double top_decile_mean = 0.0;
  std::size_t count = 0;
  double ratio() const { return top_decile_mean > 0.0 ? bottom_decile_mean / top_decile_mean : 0.0; }
};

SpatialReport spatial_distribution(const JndSource& source, const DatasetSplit& split, const CamCache& cams);

RasterImage cam_to_raster(const CamMap& c);
/// Zero maps to gray 125; one normalized unit is 127.5 levels either side.
RasterImage jnd_to_raster(const JndImage& e);
/// Denormalized and clipped to [0,255].
RasterImage image_to_raster(const ImageTensor& x);

struct VisualPaths {
  std::filesystem::path cam, jnd, original, distorted;
};

/// Writes <stem>_cam.png, <stem>_jnd.png, <stem>_original.png and
/// <stem>_distorted.png into out_dir.
VisualPaths export_visuals(const ImageTensor& x, const CamMap& c, const JndImage& e, const ImageTensor& distorted,
                           const std::filesystem::path& out_dir, const std::string& stem);

}  // namespace mjnd
