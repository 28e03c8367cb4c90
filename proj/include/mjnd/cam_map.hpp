#pragma once

#include <span>
#include <string>
#include <vector>

namespace mjnd {

/// Attention map over image pixels, row-major H x W, every value in [0,1].
struct CamMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;
  /// Classifier arch id, or "merged".
  std::string source;
  int target_class = -1;

  float at(int h, int w) const { return values[static_cast<std::size_t>(h) * width + w]; }
};

/// Min-max rescale into [0,1]. A zero-range input maps to the constant 0.5.
void normalize_min_max(std::span<float> values);

/// Elementwise mean of equally sized maps.
CamMap merge_cams(std::span<const CamMap> maps);

/// Average attention I over all pixels.
double mean_attention(const CamMap& c);

}  // namespace mjnd
