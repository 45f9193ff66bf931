#pragma once

#include <set>
#include <utility>

#include "btseg/tensor.hpp"
#include "btseg/types.hpp"

namespace btseg::pooling {

enum class Variant { avg, segm, conf, segconf };

/// Per-sample, per-channel mean over the spatial grid: (b,d,m,n) -> (b,d).
Tensor average_pool(const Tensor& y);

/// Binary exclusion mask from a segmentation map, downsampled to the feature
/// grid by per-block majority vote: 0 where the winning label is a mobile
/// class, 1 otherwise. Majority ties go to the smallest class id.
Tensor mask_from_segmentation(const SegmentationMap& s, const std::set<std::int32_t>& mobile_classes,
                              std::pair<std::size_t, std::size_t> target_grid);

/// sum(Y * B) / (sum(B) + eps), the mask broadcast over channels.
Tensor masked_average_pool(const Tensor& y, const Tensor& b_mask, double epsilon);

/// sum(Y * P) / (sum(P) + eps) with confidence weights in [0, 1].
Tensor confidence_average_pool(const Tensor& y, const Tensor& p, double epsilon);

/// Weights W = B * P combined: sum(Y * W) / (sum(W) + eps).
Tensor segconf_average_pool(const Tensor& y, const Tensor& b_mask, const Tensor& p,
                            double epsilon);

/// Downsamples a (b,h,w) confidence/weight plane to the feature grid by block
/// mean. Block edges must divide evenly.
Tensor downsample_block_mean(const Tensor& plane, std::pair<std::size_t, std::size_t> target_grid);

/// Gradient of any weighted pool with respect to Y:
/// d pooled[b][d] / d Y[b][d][i][j] = W[b][i][j] / (sum W[b] + eps).
/// `weights` empty means plain average pooling (uniform 1/(m*n), no eps).
Tensor pool_backward(const Tensor& g_pooled, const Tensor& weights,
                     const std::vector<std::size_t>& feature_shape, double epsilon);

}  // namespace btseg::pooling
