#include "mjnd/losses_oracle.hpp"

#include <algorithm>
#include <cmath>

#include "mjnd/errors.hpp"

namespace mjnd {

namespace oracle {

double cross_entropy(const std::array<std::vector<ProbVector>, kNumClassifiers>& probs,
                     std::span<const LabelSet::Labels> refs) {
  if (refs.empty()) throw ArgumentError("cross_entropy over an empty batch");
  double total = 0.0;
  for (int n = 0; n < kNumClassifiers; ++n) {
    if (probs[n].size() != refs.size()) throw ArgumentError("cross_entropy: batch sizes differ");
    double sum = 0.0;
    for (std::size_t b = 0; b < refs.size(); ++b) {
      const int label = refs[b][n];
      if (label < 0 || label >= kNumClasses) throw ArgumentError("cross_entropy: label outside [0,9]");
      sum += -std::log(probs[n][b].probs[label]);
    }
    total += sum / static_cast<double>(refs.size());
  }
  return total / kNumClassifiers;
}

double magnitude_from_levels(double target, double actual, double q) {
  if (!(q > 0.0)) throw ArgumentError("q must be positive");
  return std::log((target * target + actual * actual + q) / (2.0 * target * actual + q));
}

double target_level(const CamMap& c) { return 1.0 - mean_attention(c); }

double actual_level(const JndImage& e) {
  if (e.values.empty()) return 0.0;
  double sum = 0.0;
  for (float v : e.values) sum += std::abs(static_cast<double>(v));
  return sum / static_cast<double>(e.values.size());
}

double magnitude_loss(const CamMap& c, const JndImage& e, double q) {
  return magnitude_from_levels(target_level(c), actual_level(e), q);
}

std::vector<double> spatial_weights(const CamMap& c) {
  std::vector<double> v(c.values.size());
  if (v.empty()) return v;
  const double peak = *std::max_element(c.values.begin(), c.values.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = std::exp(static_cast<double>(c.values[i]) - peak);
    sum += v[i];
  }
  for (double& x : v) x /= sum;
  return v;
}

double spatial_loss(const CamMap& c, const JndImage& e, Loss3Mode mode) {
  const std::size_t plane = static_cast<std::size_t>(c.height) * c.width;
  if (e.height != c.height || e.width != c.width || e.values.size() != plane * kChannels) {
    throw ArgumentError("spatial_loss: CAM and noise dimensions differ");
  }
  const auto v = spatial_weights(c);
  double out = 0.0;
  for (std::size_t i = 0; i < plane; ++i) {
    double m = 0.0;
    for (int ch = 0; ch < kChannels; ++ch) {
      const double x = e.values[ch * plane + i];
      m += mode == Loss3Mode::kMagnitude ? std::abs(x) : x;
    }
    out += v[i] * (m / kChannels);
  }
  return out;
}

}  // namespace oracle
}  // namespace mjnd
