#pragma once

#include <cstdint>

namespace mjnd::test {

/// Largest absolute difference between the differentiable losses and the
/// scalar oracle over random fixtures.
struct EquivalenceResult {
  double loss1_probs = 0.0;
  double loss1_logits = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  double loss3_signed = 0.0;
  int fixtures = 0;
};

EquivalenceResult loss_equivalence(int fixtures, std::uint64_t seed);

/// Largest relative error between autograd and central finite differences
/// of each loss with respect to e, over `probes` coordinates per loss.
struct GradientResult {
  double loss1 = 0.0;
  double loss2 = 0.0;
  double loss3 = 0.0;
  int probes = 0;
};

GradientResult gradient_check(int probes, std::uint64_t seed);

}  // namespace mjnd::test
