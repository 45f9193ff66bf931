#pragma once

#include <cstddef>

#include "btseg/tensor.hpp"
#include "btseg/types.hpp"

namespace btseg::geometry {

/// Dense alignment field on the output grid. Entry (i, j) holds the absolute
/// (x, y) coordinates to sample from the image being warped; the exact pair
/// (0, 0) is the sentinel for an invalid pixel, so a genuine sample at the
/// origin is not representable (generators must avoid emitting it).
struct WarpField {
    Tensor values;  // (h, w, 2), channel 0 = x, channel 1 = y

    std::size_t height() const { return values.dim(0); }
    std::size_t width() const { return values.dim(1); }
    bool valid_at(std::size_t i, std::size_t j) const {
        return !(values.at(i, j, 0) == 0.0 && values.at(i, j, 1) == 0.0);
    }
};

struct Rect {
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t area() const { return height * width; }
    bool operator==(const Rect&) const = default;
};

struct WarpResult {
    Tensor image;  // (c, h, w), invalid pixels zeroed
    Tensor mask;   // (h, w), 1 where the warp entry is valid and in-bounds
};

/// All tensors cropped to identical extents; ready for paired augmentation.
struct AlignedPair {
    Tensor source;           // (c, h, w)
    Tensor target;           // (c, h, w)
    SegmentationMap labels;  // (h, w)
    Tensor confidence;       // (h, w)
};

/// Bilinear sampling of `image` at the warp coordinates. A pixel is valid iff
/// its warp entry is not the sentinel and lies within [0, w-1] x [0, h-1].
WarpResult apply_warp(const Tensor& image, const WarpField& warp);

/// Maximal-area axis-aligned rectangle of 1-entries. Ties broken by smallest
/// top, then smallest left, then largest width.
Rect largest_interior_rectangle(const Tensor& valid);

AlignedPair crop_triple(const Tensor& source, const Tensor& warped_target,
                        const SegmentationMap& labels, const Tensor& confidence, const Rect& rect);

/// True iff the valid fraction reaches `min_valid_fraction` and the largest
/// interior rectangle has both sides >= `min_rect_side`.
bool filter_pair(const Tensor& valid, double min_valid_fraction, std::size_t min_rect_side);

Tensor crop_image(const Tensor& image, const Rect& rect);
Tensor crop_plane(const Tensor& plane, const Rect& rect);
IntTensor crop_labels(const IntTensor& labels, const Rect& rect);

}  // namespace btseg::geometry
