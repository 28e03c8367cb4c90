#include "mjnd/loss_types.hpp"

#include "mjnd/errors.hpp"

namespace mjnd {

std::string_view loss3_mode_name(Loss3Mode mode) {
  return mode == Loss3Mode::kMagnitude ? "magnitude" : "signed";
}

Loss3Mode parse_loss3_mode(std::string_view text) {
  if (text == "magnitude") return Loss3Mode::kMagnitude;
  if (text == "signed") return Loss3Mode::kSigned;
  throw ConfigError("unknown loss3 mode '" + std::string(text) + "' (expected magnitude|signed)");
}

LossBundle total_loss(double l1, double l2, double l3, double alpha, double beta, double q) {
  if (alpha < 0.0 || beta < 0.0) throw ArgumentError("loss weights must be non-negative");
  LossBundle b;
  b.loss1 = l1;
  b.loss2 = l2;
  b.loss3 = l3;
  b.alpha = alpha;
  b.beta = beta;
  b.q = q;
  b.total = l1 + alpha * l2 + beta * l3;
  return b;
}

}  // namespace mjnd
