#include "mjnd/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mjnd/errors.hpp"
#include "mjnd/torch_bridge.hpp"

namespace mjnd {
namespace {

namespace fs = std::filesystem;

struct Chunk {
  std::vector<std::uint32_t> ids;
  torch::Tensor x;
};

template <typename Fn>
void for_each_chunk(const DatasetSplit& split, std::span<const std::size_t> indices, Fn&& fn) {
  const std::size_t total = indices.empty() ? split.size() : indices.size();
  std::vector<const PixelImage*> ptrs;
  for (std::size_t start = 0; start < total; start += kInferenceChunk) {
    const std::size_t end = std::min(total, start + kInferenceChunk);
    Chunk chunk;
    ptrs.clear();
    for (std::size_t i = start; i < end; ++i) {
      const auto& rec = split.records[indices.empty() ? i : indices[i]];
      ptrs.push_back(&rec);
      chunk.ids.push_back(rec.id);
    }
    chunk.x = normalized_batch(ptrs);
    fn(chunk);
  }
}

void accumulate(RcaAccumulator& acc, const std::array<torch::Tensor, kNumClassifiers>& labels,
                std::span<const std::uint32_t> ids, const LabelSet& refs) {
  std::array<const std::int64_t*, kNumClassifiers> rows{};
  std::array<torch::Tensor, kNumClassifiers> contiguous;
  for (int n = 0; n < kNumClassifiers; ++n) {
    contiguous[n] = labels[n].contiguous();
    rows[n] = contiguous[n].data_ptr<std::int64_t>();
  }
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!refs.contains(ids[i])) {
      throw ArgumentError("rca: image id " + std::to_string(ids[i]) + " missing from reference labels");
    }
    LabelSet::Labels predicted{};
    for (int n = 0; n < kNumClassifiers; ++n) predicted[n] = static_cast<std::uint8_t>(rows[n][i]);
    acc.add(predicted, refs.at(ids[i]));
  }
}

RasterImage gray_raster(int h, int w) {
  RasterImage r;
  r.height = h;
  r.width = w;
  r.channels = 1;
  r.pixels.resize(static_cast<std::size_t>(h) * w);
  return r;
}

RasterImage rgb_raster(int h, int w) {
  RasterImage r;
  r.height = h;
  r.width = w;
  r.channels = 3;
  r.pixels.resize(static_cast<std::size_t>(h) * w * 3);
  return r;
}

std::uint8_t to_level(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); }

}  // namespace

JndSource generator_source(GeneratorModel& g, const CamCache& cams) {
  return [&g, &cams](const torch::Tensor& x, std::span<const std::uint32_t> ids) {
    return generate_jnd_batch(g, x, cams.gather(ids));
  };
}

std::array<torch::Tensor, kNumClassifiers> predict_labels(std::span<ClassifierModel> classifiers,
                                                          const torch::Tensor& images) {
  if (classifiers.size() != kNumClassifiers) throw ArgumentError("expected four classifiers");
  std::array<torch::Tensor, kNumClassifiers> out;
  for (int n = 0; n < kNumClassifiers; ++n) {
    out[n] = predict_softmax_batch(classifiers[n], images).argmax(1);
  }
  return out;
}

RcaReport rca(std::span<ClassifierModel> classifiers, const torch::Tensor& distorted,
              std::span<const std::uint32_t> ids, const LabelSet& refs) {
  if (distorted.size(0) != static_cast<std::int64_t>(ids.size())) {
    throw ArgumentError("rca: image count does not match id count");
  }
  for (auto id : ids) {
    if (!refs.contains(id)) {
      throw ArgumentError("rca: image id " + std::to_string(id) + " missing from reference labels");
    }
  }
  RcaAccumulator acc;
  for (std::int64_t start = 0; start < distorted.size(0); start += static_cast<std::int64_t>(kInferenceChunk)) {
    const auto len = std::min<std::int64_t>(static_cast<std::int64_t>(kInferenceChunk), distorted.size(0) - start);
    accumulate(acc, predict_labels(classifiers, distorted.narrow(0, start, len)),
               ids.subspan(static_cast<std::size_t>(start), static_cast<std::size_t>(len)), refs);
  }
  return acc.report();
}

torch::Tensor psnr_batch(const torch::Tensor& x, const torch::Tensor& distorted) {
  if (x.sizes() != distorted.sizes()) throw ArgumentError("psnr: batch shapes differ");
  const auto sse = (distorted.to(torch::kFloat64) - x.to(torch::kFloat64)).square().flatten(1).sum(1);
  const auto count = static_cast<std::size_t>(x[0].numel());
  auto out = torch::empty({x.size(0)}, torch::kFloat64);
  auto sse_acc = sse.accessor<double, 1>();
  auto out_acc = out.accessor<double, 1>();
  for (std::int64_t i = 0; i < x.size(0); ++i) out_acc[i] = psnr_from_normalized_sse(sse_acc[i], count);
  return out;
}

JndEvaluation evaluate_jnd(std::span<ClassifierModel> classifiers, const JndSource& source,
                           const DatasetSplit& split, const LabelSet& refs, std::span<const std::size_t> indices) {
  RcaAccumulator acc;
  double psnr_sum = 0.0;
  double level_sum = 0.0;
  std::size_t count = 0;
  for_each_chunk(split, indices, [&](const Chunk& chunk) {
    torch::NoGradGuard no_grad;
    const auto e = source(chunk.x, chunk.ids);
    const auto distorted = chunk.x + e;
    accumulate(acc, predict_labels(classifiers, distorted), chunk.ids, refs);
    psnr_sum += psnr_batch(chunk.x, distorted).sum().item<double>();
    level_sum += e.abs().flatten(1).mean(1).sum().item<double>();
    count += chunk.ids.size();
  });
  JndEvaluation out;
  out.rca = acc.report();
  out.count = count;
  if (count) {
    out.mean_psnr = psnr_sum / static_cast<double>(count);
    out.mean_actual_level = level_sum / static_cast<double>(count);
  }
  return out;
}

torch::Tensor rms_matched_noise(const torch::Tensor& e, std::span<const std::uint32_t> ids, std::uint64_t seed) {
  if (e.size(0) != static_cast<std::int64_t>(ids.size())) throw ArgumentError("noise: id count mismatch");
  const auto per_image = e[0].numel();
  auto noise = torch::empty(e.sizes(), torch::kFloat64);
  const auto e64 = e.detach().to(torch::kFloat64).contiguous();
  const double* src = e64.data_ptr<double>();
  double* dst = noise.data_ptr<double>();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + ids[i]);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double target = 0.0;
    double drawn = 0.0;
    double* out = dst + i * per_image;
    const double* ref = src + i * per_image;
    for (std::int64_t k = 0; k < per_image; ++k) {
      out[k] = gauss(rng);
      drawn += out[k] * out[k];
      target += ref[k] * ref[k];
    }
    const double scale = target > 0.0 ? std::sqrt(target / drawn) : 0.0;
    for (std::int64_t k = 0; k < per_image; ++k) out[k] *= scale;
  }
  return noise.to(e.dtype());
}

WgnReport wgn_baseline(std::span<ClassifierModel> classifiers, const JndSource& source, const DatasetSplit& split,
                       const LabelSet& refs, std::uint64_t seed) {
  RcaAccumulator jnd_acc;
  RcaAccumulator wgn_acc;
  double psnr_jnd = 0.0;
  double psnr_wgn = 0.0;
  std::size_t count = 0;
  for_each_chunk(split, {}, [&](const Chunk& chunk) {
    torch::NoGradGuard no_grad;
    const auto e = source(chunk.x, chunk.ids);
    const auto noise = rms_matched_noise(e, chunk.ids, seed);
    const auto with_jnd = chunk.x + e;
    const auto with_wgn = chunk.x + noise;
    accumulate(jnd_acc, predict_labels(classifiers, with_jnd), chunk.ids, refs);
    accumulate(wgn_acc, predict_labels(classifiers, with_wgn), chunk.ids, refs);
    psnr_jnd += psnr_batch(chunk.x, with_jnd).sum().item<double>();
    psnr_wgn += psnr_batch(chunk.x, with_wgn).sum().item<double>();
    count += chunk.ids.size();
  });
  WgnReport r;
  r.jnd = jnd_acc.report();
  r.wgn = wgn_acc.report();
  if (count) {
    r.mean_psnr_jnd = psnr_jnd / static_cast<double>(count);
    r.mean_psnr_wgn = psnr_wgn / static_cast<double>(count);
  }
  return r;
}

HomogeneityReport homogeneity_test(std::span<ClassifierModel> classifiers, const JndSource& source,
                                   const DatasetSplit& split, const LabelSet& refs) {
  std::array<RcaAccumulator, kHomogeneitySteps + 1> accs;
  for_each_chunk(split, {}, [&](const Chunk& chunk) {
    torch::NoGradGuard no_grad;
    const auto e = source(chunk.x, chunk.ids);
    for (int k = 0; k <= kHomogeneitySteps; ++k) {
      const auto distorted = k == 0 ? chunk.x : chunk.x + e * HomogeneityReport::fraction(k);
      accumulate(accs[k], predict_labels(classifiers, distorted), chunk.ids, refs);
    }
  });
  HomogeneityReport r;
  for (int k = 0; k <= kHomogeneitySteps; ++k) r.by_step[k] = accs[k].report();
  return r;
}

SpatialReport spatial_distribution(const JndSource& source, const DatasetSplit& split, const CamCache& cams) {
  double bottom_sum = 0.0;
  double top_sum = 0.0;
  std::size_t count = 0;
  const auto decile = static_cast<std::int64_t>(kPixelsPerImage / 10);
  for_each_chunk(split, {}, [&](const Chunk& chunk) {
    torch::NoGradGuard no_grad;
    const auto magnitude = source(chunk.x, chunk.ids).abs().mean(1).flatten(1);  // [B,HW]
    const auto cam = cams.gather(chunk.ids).flatten(1);
    const auto order = cam.argsort(1, /*descending=*/false);
    const auto sorted = magnitude.gather(1, order);
    bottom_sum += sorted.narrow(1, 0, decile).mean(1).sum().item<double>();
    top_sum += sorted.narrow(1, sorted.size(1) - decile, decile).mean(1).sum().item<double>();
    count += chunk.ids.size();
  });
  SpatialReport r;
  r.count = count;
  if (count) {
    r.bottom_decile_mean = bottom_sum / static_cast<double>(count);
    r.top_decile_mean = top_sum / static_cast<double>(count);
  }
  return r;
}

RasterImage cam_to_raster(const CamMap& c) {
  RasterImage r = gray_raster(c.height, c.width);
  for (std::size_t i = 0; i < r.pixels.size(); ++i) r.pixels[i] = to_level(255.0 * c.values[i]);
  return r;
}

RasterImage jnd_to_raster(const JndImage& e) {
  RasterImage r = rgb_raster(e.height, e.width);
  const std::size_t plane = static_cast<std::size_t>(e.height) * e.width;
  for (std::size_t p = 0; p < plane; ++p) {
    for (int c = 0; c < kChannels; ++c) r.pixels[p * 3 + c] = to_level(125.0 + 127.5 * e.values[c * plane + p]);
  }
  return r;
}

RasterImage image_to_raster(const ImageTensor& x) {
  const PixelImage img = denormalize(x, /*clip=*/true);
  RasterImage r = rgb_raster(x.height, x.width);
  r.pixels = img.pixels;
  return r;
}

VisualPaths export_visuals(const ImageTensor& x, const CamMap& c, const JndImage& e, const ImageTensor& distorted,
                           const fs::path& out_dir, const std::string& stem) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir)) throw IoError("cannot create output directory " + out_dir.string());
  VisualPaths p{out_dir / (stem + "_cam.png"), out_dir / (stem + "_jnd.png"), out_dir / (stem + "_original.png"),
                out_dir / (stem + "_distorted.png")};
  write_png(p.cam, cam_to_raster(c));
  write_png(p.jnd, jnd_to_raster(e));
  write_png(p.original, image_to_raster(x));
  write_png(p.distorted, image_to_raster(distorted));
  return p;
}

}  // namespace mjnd
