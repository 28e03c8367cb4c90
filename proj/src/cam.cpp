#include "mjnd/cam.hpp"

#include <cstring>

#include "mjnd/container.hpp"
#include "mjnd/digest.hpp"
#include "mjnd/errors.hpp"
#include "mjnd/log.hpp"
#include "mjnd/torch_bridge.hpp"

namespace mjnd {
namespace {

namespace fs = std::filesystem;
namespace F = torch::nn::functional;

constexpr std::string_view kMagic = "MJNDCAMS";

void require_cam_ready(ClassifierModel& model) {
  if (model.class_weights().size(1) != model.feature_channels()) {
    throw ConfigError(std::string(arch_id(model.arch())) +
                      " is not cam_ready: classification layer does not read the final feature stack");
  }
  if (!model.frozen()) throw ArgumentError("CAM requires a frozen classifier");
}

}  // namespace

torch::Tensor raw_cam_batch(ClassifierModel& model, const torch::Tensor& x, const torch::Tensor& targets) {
  require_cam_ready(model);
  torch::NoGradGuard no_grad;
  const auto features = model.feature_maps(x);  // [B,K,h,w]
  if (targets.dim() != 1 || targets.size(0) != x.size(0)) {
    throw ArgumentError("CAM targets must be one label per image");
  }
  if (targets.numel() > 0 && (targets.min().item<std::int64_t>() < 0 ||
                              targets.max().item<std::int64_t>() >= kNumClasses)) {
    throw ArgumentError("CAM target class outside [0,9]");
  }
  const auto weights = model.class_weights().index_select(0, targets.to(torch::kInt64));  // [B,K]
  auto raw = (features * weights.unsqueeze(-1).unsqueeze(-1)).sum(1, true);  // [B,1,h,w]
  raw = F::interpolate(raw, F::InterpolateFuncOptions()
                                .size(std::vector<std::int64_t>{kImageSize, kImageSize})
                                .mode(torch::kBilinear)
                                .align_corners(false));
  return raw.squeeze(1);
}

torch::Tensor normalize_min_max_batch(const torch::Tensor& raw) {
  const auto b = raw.size(0);
  const auto flat = raw.reshape({b, -1}).to(torch::kFloat64);
  const auto lo = std::get<0>(flat.min(1, true));
  const auto hi = std::get<0>(flat.max(1, true));
  const auto range = hi - lo;
  const auto degenerate = range <= 1e-12;
  auto scaled = ((flat - lo) / torch::where(degenerate, torch::ones_like(range), range)).clamp(0.0, 1.0);
  scaled = torch::where(degenerate.expand_as(scaled), torch::full_like(scaled, 0.5), scaled);
  return scaled.to(torch::kFloat32).reshape(raw.sizes());
}

torch::Tensor compute_cam_batch(ClassifierModel& model, const torch::Tensor& x, const torch::Tensor& targets) {
  return normalize_min_max_batch(raw_cam_batch(model, x, targets));
}

CamMap compute_cam(ClassifierModel& model, const ImageTensor& x, int target_class) {
  const auto maps = compute_cam_batch(model, to_tensor(x).unsqueeze(0),
                                      torch::tensor({static_cast<std::int64_t>(target_class)}));
  return cam_from_tensor(maps[0], std::string(arch_id(model.arch())), target_class);
}

CamCache::CamCache(std::vector<std::uint32_t> ids, torch::Tensor maps)
    : ids_(std::move(ids)), maps_(std::move(maps)) {
  if (maps_.size(0) != static_cast<std::int64_t>(ids_.size())) {
    throw ArgumentError("CAM cache: id count does not match map count");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) index_.emplace(ids_[i], static_cast<std::int64_t>(i));
}

torch::Tensor CamCache::map(std::uint32_t id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ArgumentError("image id " + std::to_string(id) + " missing from CAM cache");
  return maps_[it->second];
}

torch::Tensor CamCache::gather(std::span<const std::uint32_t> ids) const {
  std::vector<std::int64_t> rows;
  rows.reserve(ids.size());
  for (auto id : ids) {
    auto it = index_.find(id);
    if (it == index_.end()) throw ArgumentError("image id " + std::to_string(id) + " missing from CAM cache");
    rows.push_back(it->second);
  }
  return maps_.index_select(0, torch::tensor(rows, torch::kInt64));
}

CamMap CamCache::cam_map(std::uint32_t id) const { return cam_from_tensor(map(id), "merged", -1); }

bool CamCache::matches(std::uint64_t split,
                       const std::array<std::uint64_t, kNumClassifiers>& digests) const {
  return split_digest == split && classifier_digests == digests;
}

void CamCache::save(const fs::path& file) const {
  Container c;
  c.header["split_digest"] = to_hex(split_digest);
  auto& digests = c.header["classifier_digests"] = nlohmann::json::array();
  for (auto d : classifier_digests) digests.push_back(to_hex(d));
  c.header["count"] = ids_.size();
  c.header["height"] = kImageSize;
  c.header["width"] = kImageSize;
  c.header["run_id"] = run_id;
  const auto maps = maps_.contiguous();
  const std::size_t id_bytes = ids_.size() * sizeof(std::uint32_t);
  const std::size_t map_bytes = static_cast<std::size_t>(maps.numel()) * sizeof(float);
  c.payload.resize(id_bytes + map_bytes);
  std::memcpy(c.payload.data(), ids_.data(), id_bytes);
  if (map_bytes) std::memcpy(c.payload.data() + id_bytes, maps.data_ptr<float>(), map_bytes);
  write_container(file, kMagic, c);
}

CamCache CamCache::load(const fs::path& file) {
  const Container c = read_container(file, kMagic);
  try {
    const auto count = c.header.at("count").get<std::size_t>();
    const auto h = c.header.at("height").get<std::int64_t>();
    const auto w = c.header.at("width").get<std::int64_t>();
    const std::size_t id_bytes = count * sizeof(std::uint32_t);
    const std::size_t map_bytes = count * static_cast<std::size_t>(h * w) * sizeof(float);
    if (c.payload.size() != id_bytes + map_bytes) throw IoError("CAM payload size mismatch in " + file.string());
    std::vector<std::uint32_t> ids(count);
    std::memcpy(ids.data(), c.payload.data(), id_bytes);
    auto maps = torch::empty({static_cast<std::int64_t>(count), h, w}, torch::kFloat32);
    if (map_bytes) std::memcpy(maps.data_ptr<float>(), c.payload.data() + id_bytes, map_bytes);
    CamCache cache(std::move(ids), std::move(maps));
    cache.split_digest = from_hex(c.header.at("split_digest").get<std::string>());
    for (int n = 0; n < kNumClassifiers; ++n) {
      cache.classifier_digests[n] = from_hex(c.header.at("classifier_digests").at(n).get<std::string>());
    }
    cache.run_id = c.header.value("run_id", "");
    return cache;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt CAM cache " + file.string() + ": " + e.what());
  }
}

CamCache build_cam_cache(std::span<ClassifierModel> models, const DatasetSplit& split, const LabelSet& refs) {
  if (models.size() != kNumClassifiers) throw ArgumentError("CAM cache needs four classifiers");
  std::vector<std::uint32_t> ids;
  std::vector<torch::Tensor> parts;
  std::vector<const PixelImage*> ptrs;
  for (std::size_t start = 0; start < split.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(split.size(), start + kInferenceChunk);
    ptrs.clear();
    std::array<std::vector<std::int64_t>, kNumClassifiers> targets;
    for (std::size_t i = start; i < end; ++i) {
      const auto& rec = split.records[i];
      ptrs.push_back(&rec);
      ids.push_back(rec.id);
      const auto& row = refs.at(rec.id);
      for (int n = 0; n < kNumClassifiers; ++n) targets[n].push_back(row[n]);
    }
    const auto x = normalized_batch(ptrs);
    torch::Tensor merged;
    for (int n = 0; n < kNumClassifiers; ++n) {
      auto cam = compute_cam_batch(models[n], x, torch::tensor(targets[n], torch::kInt64));
      merged = n == 0 ? cam.to(torch::kFloat64) : merged + cam.to(torch::kFloat64);
    }
    parts.push_back((merged / kNumClassifiers).to(torch::kFloat32));
  }
  CamCache cache(std::move(ids), parts.empty() ? torch::empty({0, kImageSize, kImageSize}) : torch::cat(parts));
  cache.split_digest = split.digest();
  cache.classifier_digests = classifier_digests(models);
  return cache;
}

CamCache load_or_build_cam_cache(const fs::path& file, std::span<ClassifierModel> models,
                                 const DatasetSplit& split, const LabelSet& refs, const std::string& run_id,
                                 bool* rebuilt) {
  if (rebuilt) *rebuilt = false;
  const auto digests = classifier_digests(models);
  if (fs::exists(file)) {
    try {
      CamCache cached = CamCache::load(file);
      if (cached.matches(split.digest(), digests)) return cached;
      log_info("CAM cache ", file.string(), " is stale, rebuilding");
    } catch (const IoError& e) {
      log_info("CAM cache unreadable (", e.what(), "), rebuilding");
    }
  }
  CamCache cache = build_cam_cache(models, split, refs);
  cache.run_id = run_id;
  cache.save(file);
  if (rebuilt) *rebuilt = true;
  return cache;
}

}  // namespace mjnd
