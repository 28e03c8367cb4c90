#include "mjnd/jnd_image.hpp"

#include <algorithm>

#include "mjnd/errors.hpp"

namespace mjnd {

StackedInput stack_inputs(const ImageTensor& x, const CamMap& c) {
  if (x.height != c.height || x.width != c.width) {
    throw ArgumentError("stack_inputs: image and CAM dimensions differ");
  }
  const std::size_t plane = static_cast<std::size_t>(x.height) * x.width;
  StackedInput s;
  s.height = x.height;
  s.width = x.width;
  s.values.resize(plane * (kChannels + 1));
  std::copy(x.values.begin(), x.values.end(), s.values.begin());
  for (std::size_t i = 0; i < plane; ++i) s.values[kChannels * plane + i] = 2.0f * c.values[i] - 1.0f;
  return s;
}

std::pair<ImageTensor, CamMap> unstack_inputs(const StackedInput& s) {
  const std::size_t plane = static_cast<std::size_t>(s.height) * s.width;
  if (s.values.size() != plane * (kChannels + 1)) {
    throw ArgumentError("unstack_inputs: expected 4 channels");
  }
  ImageTensor x;
  x.height = s.height;
  x.width = s.width;
  x.values.assign(s.values.begin(), s.values.begin() + static_cast<std::ptrdiff_t>(kChannels * plane));
  CamMap c;
  c.height = s.height;
  c.width = s.width;
  c.source = "merged";
  c.values.resize(plane);
  for (std::size_t i = 0; i < plane; ++i) c.values[i] = (s.values[kChannels * plane + i] + 1.0f) * 0.5f;
  return {std::move(x), std::move(c)};
}

ImageTensor apply_jnd(const ImageTensor& x, const JndImage& e) {
  if (x.height != e.height || x.width != e.width || x.values.size() != e.values.size()) {
    throw ArgumentError("apply_jnd: image and noise dimensions differ");
  }
  ImageTensor out = x;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += e.values[i];
  return out;
}

JndImage scale_jnd(const JndImage& e, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ArgumentError("scale_jnd: fraction must lie in [0, 1]");
  }
  JndImage out = e;
  for (float& v : out.values) v = static_cast<float>(static_cast<double>(v) * fraction);
  return out;
}

}  // namespace mjnd
