#include "mjnd/losses.hpp"

#include "mjnd/errors.hpp"
#include "mjnd/labels.hpp"

namespace mjnd::losses {
namespace {

void check_refs(std::span<const torch::Tensor> outputs, const torch::Tensor& refs) {
  if (outputs.size() != kNumClassifiers) throw ArgumentError("Loss1 needs four classifier outputs");
  if (refs.dim() != 2 || refs.size(1) != kNumClassifiers) throw ArgumentError("refs must be [B,4]");
  if (refs.numel() > 0 && (refs.min().item<std::int64_t>() < 0 ||
                           refs.max().item<std::int64_t>() >= kNumClasses)) {
    throw ArgumentError("reference label outside [0,9]");
  }
  for (const auto& o : outputs) {
    if (o.dim() != 2 || o.size(0) != refs.size(0) || o.size(1) != kNumClasses) {
      throw ArgumentError("classifier output must be [B,10] matching refs");
    }
  }
}

void check_pair(const torch::Tensor& cam, const torch::Tensor& e) {
  if (cam.dim() != 3 || e.dim() != 4 || e.size(1) != 3 || cam.size(0) != e.size(0) ||
      cam.size(1) != e.size(2) || cam.size(2) != e.size(3)) {
    throw ArgumentError("expected cam [B,H,W] and e [B,3,H,W], got " + c10::str(cam.sizes()) + " and " +
                        c10::str(e.sizes()));
  }
}

}  // namespace

torch::Tensor cross_entropy_from_probs(std::span<const torch::Tensor> probs, const torch::Tensor& refs) {
  check_refs(probs, refs);
  torch::Tensor sum;
  for (int n = 0; n < kNumClassifiers; ++n) {
    const auto picked = probs[n].gather(1, refs.select(1, n).to(torch::kInt64).unsqueeze(1)).squeeze(1);
    const auto ce = -torch::log(picked).mean();
    sum = n == 0 ? ce : sum + ce;
  }
  return sum / kNumClassifiers;
}

torch::Tensor cross_entropy_from_logits(std::span<const torch::Tensor> logits, const torch::Tensor& refs) {
  check_refs(logits, refs);
  torch::Tensor sum;
  for (int n = 0; n < kNumClassifiers; ++n) {
    const auto ce = torch::nn::functional::cross_entropy(logits[n], refs.select(1, n).to(torch::kInt64));
    sum = n == 0 ? ce : sum + ce;
  }
  return sum / kNumClassifiers;
}

torch::Tensor target_level(const torch::Tensor& cam) { return 1.0 - cam.flatten(1).mean(1); }

torch::Tensor actual_level(const torch::Tensor& e) { return e.abs().flatten(1).mean(1); }

torch::Tensor magnitude_loss(const torch::Tensor& cam, const torch::Tensor& e, double q) {
  check_pair(cam, e);
  if (!(q > 0.0)) throw ArgumentError("q must be positive");
  const auto n = target_level(cam).to(e.dtype());
  const auto n0 = actual_level(e);
  return (torch::log(n * n + n0 * n0 + q) - torch::log(2.0 * n * n0 + q)).mean();
}

torch::Tensor spatial_weights(const torch::Tensor& cam) { return cam.flatten(1).softmax(1); }

torch::Tensor spatial_loss(const torch::Tensor& cam, const torch::Tensor& e, Loss3Mode mode) {
  check_pair(cam, e);
  const auto v = spatial_weights(cam).to(e.dtype());
  const auto per_pixel = (mode == Loss3Mode::kMagnitude ? e.abs() : e).mean(1).flatten(1);
  return (v * per_pixel).sum(1).mean();
}

LossBundle LossTerms::bundle() const {
  return total_loss(loss1.item<double>(), loss2.item<double>(), loss3.item<double>(), alpha, beta, q);
}

LossTerms combine(torch::Tensor loss1, torch::Tensor loss2, torch::Tensor loss3, double alpha, double beta,
                  double q) {
  if (alpha < 0.0 || beta < 0.0) throw ArgumentError("loss weights must be non-negative");
  LossTerms t;
  t.total = loss1 + alpha * loss2 + beta * loss3;
  t.loss1 = std::move(loss1);
  t.loss2 = std::move(loss2);
  t.loss3 = std::move(loss3);
  t.alpha = alpha;
  t.beta = beta;
  t.q = q;
  return t;
}

}  // namespace mjnd::losses
