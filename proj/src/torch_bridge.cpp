#include "mjnd/torch_bridge.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "mjnd/errors.hpp"

namespace mjnd {

torch::Tensor to_tensor(const ImageTensor& x) {
  if (x.values.size() != static_cast<std::size_t>(x.height) * x.width * kChannels) {
    throw ArgumentError("image tensor has " + std::to_string(x.values.size()) + " values, expected 3*H*W");
  }
  return torch::from_blob(const_cast<float*>(x.values.data()), {kChannels, x.height, x.width},
                          torch::kFloat32)
      .clone();
}

torch::Tensor to_batch(std::span<const ImageTensor> xs) {
  std::vector<torch::Tensor> parts;
  parts.reserve(xs.size());
  for (const auto& x : xs) parts.push_back(to_tensor(x));
  return torch::stack(parts);
}

torch::Tensor normalized_batch(std::span<const PixelImage* const> records,
                               std::span<const std::uint8_t> flip) {
  const auto b = static_cast<std::int64_t>(records.size());
  auto out = torch::empty({b, kChannels, kImageSize, kImageSize}, torch::kFloat32);
  float* dst = out.data_ptr<float>();
  for (std::int64_t i = 0; i < b; ++i) {
    const PixelImage& img = *records[i];
    if (img.height != kImageSize || img.width != kImageSize) {
      throw ArgumentError("normalized_batch expects 32x32 records");
    }
    const bool mirror = !flip.empty() && flip[i] != 0;
    float* plane0 = dst + i * kValuesPerImage;
    for (int h = 0; h < kImageSize; ++h) {
      for (int w = 0; w < kImageSize; ++w) {
        const int src_w = mirror ? kImageSize - 1 - w : w;
        for (int c = 0; c < kChannels; ++c) {
          plane0[(c * kImageSize + h) * kImageSize + w] = normalize_value(img.at(h, src_w, c));
        }
      }
    }
  }
  return out;
}

ImageTensor image_from_tensor(const torch::Tensor& chw, std::uint32_t id) {
  auto t = chw.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  if (t.dim() != 3 || t.size(0) != kChannels) throw ArgumentError("expected a [3,H,W] tensor");
  ImageTensor x;
  x.height = static_cast<int>(t.size(1));
  x.width = static_cast<int>(t.size(2));
  x.id = id;
  x.values.assign(t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
  return x;
}

JndImage jnd_from_tensor(const torch::Tensor& chw, std::uint32_t id) {
  const ImageTensor x = image_from_tensor(chw, id);
  JndImage e;
  e.height = x.height;
  e.width = x.width;
  e.values = x.values;
  e.source_id = id;
  return e;
}

torch::Tensor to_tensor(const CamMap& c) {
  if (c.values.size() != static_cast<std::size_t>(c.height) * c.width) {
    throw ArgumentError("CAM value count does not match its dimensions");
  }
  return torch::from_blob(const_cast<float*>(c.values.data()), {c.height, c.width}, torch::kFloat32)
      .clone();
}

CamMap cam_from_tensor(const torch::Tensor& hw, std::string source, int target_class) {
  auto t = hw.detach().to(torch::kCPU, torch::kFloat32).contiguous();
  if (t.dim() != 2) throw ArgumentError("expected an [H,W] tensor");
  CamMap c;
  c.height = static_cast<int>(t.size(0));
  c.width = static_cast<int>(t.size(1));
  c.values.assign(t.data_ptr<float>(), t.data_ptr<float>() + t.numel());
  c.source = std::move(source);
  c.target_class = target_class;
  return c;
}

torch::Tensor to_batch(std::span<const CamMap> cams) {
  std::vector<torch::Tensor> parts;
  parts.reserve(cams.size());
  for (const auto& c : cams) parts.push_back(to_tensor(c));
  return torch::stack(parts);
}

void update_digest(Fnv1a& h, const torch::Tensor& t) {
  auto c = t.detach().to(torch::kCPU).contiguous();
  const auto* p = static_cast<const std::byte*>(c.data_ptr());
  h.update(std::span(p, c.numel() * c.element_size()));
}

std::uint64_t module_digest(const torch::nn::Module& m) {
  std::map<std::string, torch::Tensor> ordered;
  for (const auto& item : m.named_parameters(true)) ordered.emplace("p:" + item.key(), item.value());
  for (const auto& item : m.named_buffers(true)) ordered.emplace("b:" + item.key(), item.value());
  Fnv1a h;
  for (const auto& [name, t] : ordered) {
    h.update(name);
    update_digest(h, t);
  }
  return h.value();
}

std::string serialize_module(torch::nn::Module& m) {
  torch::serialize::OutputArchive archive;
  m.save(archive);
  std::ostringstream out;
  archive.save_to(out);
  return out.str();
}

void deserialize_module(torch::nn::Module& m, const std::string& bytes) {
  std::istringstream in(bytes);
  torch::serialize::InputArchive archive;
  try {
    archive.load_from(in);
    m.load(archive);
  } catch (const c10::Error& e) {
    throw IoError(std::string("cannot restore module parameters: ") + e.what_without_backtrace());
  }
}

}  // namespace mjnd
