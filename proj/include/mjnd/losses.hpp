#pragma once

#include <torch/torch.h>

#include <span>

#include "mjnd/loss_types.hpp"

namespace mjnd::losses {

// Differentiable training losses. Every function takes batches and returns
// the batch mean of the per-image value as a 0-dim tensor.
// Shapes: cam [B,H,W] in [0,1]; e [B,3,H,W]; refs [B,4] int64.

/// Loss1 from softmax outputs, one [B,10] tensor per classifier.
torch::Tensor cross_entropy_from_probs(std::span<const torch::Tensor> probs, const torch::Tensor& refs);
/// Loss1 from logits via log-softmax; numerically safer, same value.
torch::Tensor cross_entropy_from_logits(std::span<const torch::Tensor> logits, const torch::Tensor& refs);

/// Per-image N = 1 - mean(cam), [B].
torch::Tensor target_level(const torch::Tensor& cam);
/// Per-image N0 = mean |e|, [B].
torch::Tensor actual_level(const torch::Tensor& e);

/// Loss2 = ln((N^2 + N0^2 + q) / (2 N N0 + q)).
torch::Tensor magnitude_loss(const torch::Tensor& cam, const torch::Tensor& e, double q = kDefaultQ);

/// softmax over the flattened CAM, [B,H*W].
torch::Tensor spatial_weights(const torch::Tensor& cam);
/// Loss3 = <softmax(cam), per-pixel channel mean of |e| (or e when signed)>.
torch::Tensor spatial_loss(const torch::Tensor& cam, const torch::Tensor& e,
                           Loss3Mode mode = Loss3Mode::kMagnitude);

struct LossTerms {
  torch::Tensor loss1;
  torch::Tensor loss2;
  torch::Tensor loss3;
  torch::Tensor total;
  /// Scalar snapshot; `total` re-summed from the three components.
  LossBundle bundle() const;

  double alpha = 1.0;
  double beta = 1.0;
  double q = kDefaultQ;
};

LossTerms combine(torch::Tensor loss1, torch::Tensor loss2, torch::Tensor loss3, double alpha,
                  double beta, double q = kDefaultQ);

}  // namespace mjnd::losses
