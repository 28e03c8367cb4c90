#include "mjnd/cam_map.hpp"

#include <algorithm>
#include <numeric>

#include "mjnd/errors.hpp"

namespace mjnd {

void normalize_min_max(std::span<float> values) {
  if (values.empty()) return;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double range = static_cast<double>(*hi_it) - lo;
  if (!(range > 1e-12)) {
    std::fill(values.begin(), values.end(), 0.5f);
    return;
  }
  for (float& v : values) {
    v = static_cast<float>(std::clamp((v - lo) / range, 0.0, 1.0));
  }
}

CamMap merge_cams(std::span<const CamMap> maps) {
  if (maps.empty()) throw ArgumentError("merge_cams needs at least one map");
  CamMap out;
  out.height = maps.front().height;
  out.width = maps.front().width;
  out.source = "merged";
  out.target_class = maps.front().target_class;
  const std::size_t n = static_cast<std::size_t>(out.height) * out.width;
  for (const auto& m : maps) {
    if (m.height != out.height || m.width != out.width || m.values.size() != n) {
      throw ArgumentError("merge_cams: map dimensions differ");
    }
    if (m.target_class != out.target_class) out.target_class = -1;
  }
  out.values.assign(n, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (const auto& m : maps) sum += m.values[i];
    out.values[i] = static_cast<float>(sum / static_cast<double>(maps.size()));
  }
  return out;
}

double mean_attention(const CamMap& c) {
  if (c.values.empty()) return 0.0;
  const double sum = std::accumulate(c.values.begin(), c.values.end(), 0.0);
  return sum / static_cast<double>(c.values.size());
}

}  // namespace mjnd
