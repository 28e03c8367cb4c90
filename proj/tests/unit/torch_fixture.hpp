#pragma once

#include <torch/torch.h>

#include <vector>

#include "mjnd/cam.hpp"
#include "mjnd/classifiers.hpp"
#include "mjnd/data.hpp"
#include "mjnd/labels.hpp"
#include "test_support.hpp"

namespace mjnd::test {

/// Four small untrained frozen classifiers with labels and merged CAMs for a
/// 500-image stratified training subset.
struct TinyPipeline {
  std::vector<ClassifierModel> classifiers;
  DatasetSplit split;
  LabelSet refs;
  CamCache cams;
};

inline TinyPipeline& tiny_pipeline() {
  static TinyPipeline p = [] {
    TinyPipeline t;
    for (std::size_t i = 0; i < kAllArchs.size(); ++i) {
      t.classifiers.push_back(build_classifier(kAllArchs[i], kNumClasses, ClassifierOptions{4}, 100 + i));
      t.classifiers.back().freeze();
    }
    t.split = load_dataset(shared_archive(), SplitName::kTrain, 0.01, 1);
    t.refs = generate_reference_labels(t.classifiers, t.split);
    t.cams = build_cam_cache(t.classifiers, t.split, t.refs);
    return t;
  }();
  return p;
}

}  // namespace mjnd::test
