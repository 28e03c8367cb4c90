#pragma once

// Conversions between the value types and libtorch tensors.

#include <torch/torch.h>

#include <cstdint>
#include <span>
#include <vector>

#include "mjnd/cam_map.hpp"
#include "mjnd/data.hpp"
#include "mjnd/digest.hpp"
#include "mjnd/jnd_image.hpp"

namespace mjnd {

/// [3,H,W] float tensor holding a copy of the image.
torch::Tensor to_tensor(const ImageTensor& x);
/// [B,3,H,W].
torch::Tensor to_batch(std::span<const ImageTensor> xs);
/// Normalizes records straight into a [B,3,H,W] batch; a nonzero flip[i]
/// mirrors record i. An empty mask flips nothing.
torch::Tensor normalized_batch(std::span<const PixelImage* const> records,
                               std::span<const std::uint8_t> flip = {});

ImageTensor image_from_tensor(const torch::Tensor& chw, std::uint32_t id);
JndImage jnd_from_tensor(const torch::Tensor& chw, std::uint32_t id);

/// [H,W] tensor <-> CamMap.
torch::Tensor to_tensor(const CamMap& c);
CamMap cam_from_tensor(const torch::Tensor& hw, std::string source, int target_class);
/// [B,H,W].
torch::Tensor to_batch(std::span<const CamMap> cams);

/// Folds the raw bytes of a CPU tensor into `h`.
void update_digest(Fnv1a& h, const torch::Tensor& t);

/// Digest over every named parameter and buffer of a module, in name order.
std::uint64_t module_digest(const torch::nn::Module& m);

/// Serializes a module's parameters and buffers to a byte string and back.
std::string serialize_module(torch::nn::Module& m);
void deserialize_module(torch::nn::Module& m, const std::string& bytes);

}  // namespace mjnd
