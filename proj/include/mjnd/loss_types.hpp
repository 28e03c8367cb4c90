#pragma once

#include <string>
#include <string_view>

namespace mjnd {

/// Reduction used by the spatial-distribution loss. kMagnitude pairs the
/// softmaxed CAM with the per-pixel mean |e|; kSigned pairs it with the
/// per-pixel mean of the signed e, the literal inner product.
enum class Loss3Mode { kMagnitude, kSigned };

std::string_view loss3_mode_name(Loss3Mode mode);
Loss3Mode parse_loss3_mode(std::string_view text);

inline constexpr double kDefaultQ = 1e-10;

struct LossBundle {
  double loss1 = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  double total = 0.0;
  double alpha = 1.0;
  double beta = 1.0;
  double q = kDefaultQ;
};

/// total = l1 + alpha * l2 + beta * l3, evaluated in that order.
LossBundle total_loss(double l1, double l2, double l3, double alpha, double beta,
                      double q = kDefaultQ);

}  // namespace mjnd
