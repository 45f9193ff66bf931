#pragma once

#include <cstdint>

#include "btseg/tensor.hpp"

namespace btseg {

/// Per-pixel class labels. `ignore_index` entries are skipped by losses and
/// metrics; every other entry must lie in [0, num_classes).
struct SegmentationMap {
    IntTensor labels;  // (b, h, w) or (h, w)
    int num_classes = 0;

    static constexpr std::int32_t kIgnoreIndex = 255;
};

}  // namespace btseg
