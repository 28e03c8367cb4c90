#include "mjnd/metrics.hpp"

#include <cmath>

#include "mjnd/errors.hpp"

namespace mjnd {

double psnr_from_normalized_sse(double sse, std::size_t count) {
  if (count == 0) throw ArgumentError("psnr over zero values");
  // One normalized unit is 127.5 levels on the 8-bit scale.
  const double mse = sse * 127.5 * 127.5 / static_cast<double>(count);
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double psnr(const ImageTensor& x, const ImageTensor& distorted) {
  if (x.height != distorted.height || x.width != distorted.width ||
      x.values.size() != distorted.values.size()) {
    throw ArgumentError("psnr: image dimensions differ");
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < x.values.size(); ++i) {
    const double d = static_cast<double>(distorted.values[i]) - x.values[i];
    sse += d * d;
  }
  return psnr_from_normalized_sse(sse, x.values.size());
}

void RcaAccumulator::add(const LabelSet::Labels& predicted, const LabelSet::Labels& reference) {
  for (int n = 0; n < kNumClassifiers; ++n) hits_[n] += predicted[n] == reference[n] ? 1 : 0;
  ++count_;
}

void RcaAccumulator::merge(const RcaAccumulator& other) {
  for (int n = 0; n < kNumClassifiers; ++n) hits_[n] += other.hits_[n];
  count_ += other.count_;
}

RcaReport RcaAccumulator::report() const {
  RcaReport r;
  r.count = count_;
  if (count_ == 0) return r;
  double sum = 0.0;
  for (int n = 0; n < kNumClassifiers; ++n) {
    r.acc_n[n] = 100.0 * static_cast<double>(hits_[n]) / static_cast<double>(count_);
    sum += r.acc_n[n];
  }
  r.acc = sum / kNumClassifiers;
  return r;
}

RcaReport rca_from_labels(std::span<const std::uint32_t> ids,
                          std::span<const LabelSet::Labels> distorted, const LabelSet& refs) {
  if (ids.size() != distorted.size()) throw ArgumentError("rca: ids and labels differ in length");
  RcaAccumulator acc;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!refs.contains(ids[i])) {
      throw ArgumentError("rca: image id " + std::to_string(ids[i]) + " missing from reference labels");
    }
    acc.add(distorted[i], refs.at(ids[i]));
  }
  return acc.report();
}

}  // namespace mjnd
