#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mjnd/cam_map.hpp"
#include "mjnd/classifiers.hpp"

namespace mjnd {

/// Un-normalized class activation maps, bilinearly upsampled to 32x32:
/// sum_k w_k^(target) F_k. x is [B,3,32,32], targets [B] int64.
torch::Tensor raw_cam_batch(ClassifierModel& model, const torch::Tensor& x, const torch::Tensor& targets);

/// Per-map min-max into [0,1]; zero-range maps become 0.5. [B,H,W] in and out.
torch::Tensor normalize_min_max_batch(const torch::Tensor& raw);

/// Normalized CAMs for a batch. The model must be frozen and cam_ready.
torch::Tensor compute_cam_batch(ClassifierModel& model, const torch::Tensor& x, const torch::Tensor& targets);

CamMap compute_cam(ClassifierModel& model, const ImageTensor& x, int target_class);

/// Merged CAMs (mean of the four per-classifier maps) for a whole split, each
/// classifier explaining its own reference label. Constant while the
/// classifiers stay frozen, so it is computed once and persisted.
class CamCache {
 public:
  CamCache() = default;
  CamCache(std::vector<std::uint32_t> ids, torch::Tensor maps);

  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::uint32_t>& ids() const noexcept { return ids_; }
  bool contains(std::uint32_t id) const { return index_.contains(id); }
  /// [32,32] view of one merged map.
  torch::Tensor map(std::uint32_t id) const;
  /// [B,32,32] merged maps for the given ids, in order.
  torch::Tensor gather(std::span<const std::uint32_t> ids) const;
  CamMap cam_map(std::uint32_t id) const;

  std::uint64_t split_digest = 0;
  std::array<std::uint64_t, kNumClassifiers> classifier_digests{};
  std::string run_id;

  void save(const std::filesystem::path& file) const;
  static CamCache load(const std::filesystem::path& file);
  bool matches(std::uint64_t split_digest,
               const std::array<std::uint64_t, kNumClassifiers>& classifier_digests) const;

 private:
  std::vector<std::uint32_t> ids_;
  torch::Tensor maps_;
  std::unordered_map<std::uint32_t, std::int64_t> index_;
};

CamCache build_cam_cache(std::span<ClassifierModel> models, const DatasetSplit& split, const LabelSet& refs);

CamCache load_or_build_cam_cache(const std::filesystem::path& file, std::span<ClassifierModel> models,
                                 const DatasetSplit& split, const LabelSet& refs,
                                 const std::string& run_id, bool* rebuilt = nullptr);

}  // namespace mjnd
