#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mjnd/data.hpp"
#include "mjnd/labels.hpp"

namespace mjnd {

/// Reported in place of +inf when the two images are identical.
inline constexpr double kPsnrCapDb = 100.0;

/// PSNR in dB on the 8-bit scale (MAX = 255), MSE over all H*W*3 real-valued,
/// unclipped and unrounded values.
double psnr(const ImageTensor& x, const ImageTensor& distorted);

/// Same measurement from the sum of squared differences in normalized units.
double psnr_from_normalized_sse(double sse, std::size_t count);

/// Relative classification accuracy in percent.
struct RcaReport {
  double acc = 0.0;
  std::array<double, kNumClassifiers> acc_n{};
  std::size_t count = 0;
};

/// Running per-classifier hit counter feeding an RcaReport.
class RcaAccumulator {
 public:
  void add(const LabelSet::Labels& predicted, const LabelSet::Labels& reference);
  void merge(const RcaAccumulator& other);
  RcaReport report() const;

 private:
  std::array<std::size_t, kNumClassifiers> hits_{};
  std::size_t count_ = 0;
};

/// RCA from already-assigned distorted labels, looked up by image id.
RcaReport rca_from_labels(std::span<const std::uint32_t> ids,
                          std::span<const LabelSet::Labels> distorted, const LabelSet& refs);

}  // namespace mjnd
