#pragma once

// Straight-line scalar twins of the training losses. No autodiff and no
// tensor library: these exist so the differentiable versions can be checked
// against an independent implementation.

#include <array>
#include <span>
#include <vector>

#include "mjnd/cam_map.hpp"
#include "mjnd/jnd_image.hpp"
#include "mjnd/labels.hpp"
#include "mjnd/loss_types.hpp"

namespace mjnd::oracle {

/// probs[n][b] is classifier n's softmax on distorted image b; refs[b][n] its
/// clean-image label. Mean over classifiers of the batch-mean -ln p[label].
double cross_entropy(const std::array<std::vector<ProbVector>, kNumClassifiers>& probs,
                     std::span<const LabelSet::Labels> refs);

/// ln((N^2 + N0^2 + q) / (2 N N0 + q)).
double magnitude_from_levels(double target, double actual, double q);

/// N = 1 - mean attention of the merged CAM.
double target_level(const CamMap& c);

/// N0 = mean |e| over every value of the noise image.
double actual_level(const JndImage& e);

double magnitude_loss(const CamMap& c, const JndImage& e, double q);

/// Softmax over the flattened CAM.
std::vector<double> spatial_weights(const CamMap& c);

/// Inner product of spatial_weights(c) with the per-pixel channel mean of
/// |e| (kMagnitude) or of e (kSigned).
double spatial_loss(const CamMap& c, const JndImage& e, Loss3Mode mode = Loss3Mode::kMagnitude);

}  // namespace mjnd::oracle
