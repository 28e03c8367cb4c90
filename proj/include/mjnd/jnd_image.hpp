#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mjnd/cam_map.hpp"
#include "mjnd/data.hpp"

namespace mjnd {

/// Signed noise image e in normalized model space, channel-planar like
/// ImageTensor. Generator output keeps every value inside (-1,1).
struct JndImage {
  int height = kImageSize;
  int width = kImageSize;
  std::vector<float> values;
  std::uint32_t source_id = 0;
};

/// Generator input: channels [R, G, B, CAM], planar, CAM rescaled to [-1,1].
struct StackedInput {
  int height = 0;
  int width = 0;
  std::vector<float> values;
};

StackedInput stack_inputs(const ImageTensor& x, const CamMap& c);

/// Recovers the image and the [0,1] CAM from a stacked input.
std::pair<ImageTensor, CamMap> unstack_inputs(const StackedInput& s);

/// x + e, unclipped.
ImageTensor apply_jnd(const ImageTensor& x, const JndImage& e);

/// Multiplies every value by `fraction` in [0,1].
JndImage scale_jnd(const JndImage& e, double fraction);

}  // namespace mjnd
