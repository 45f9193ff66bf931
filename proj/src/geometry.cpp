#include "btseg/geometry.hpp"

#include <cmath>
#include <vector>

#include "btseg/errors.hpp"

namespace btseg::geometry {

namespace {

void check_mask(const Tensor& valid) {
    check(valid.rank() == 2, "geometry: mask must be 2-D, got " + valid.shape_str());
    for (double v : valid.vec())
        check(v == 0.0 || v == 1.0, "geometry: mask entries must be exactly 0 or 1");
}

bool better(const Rect& a, const Rect& b) {
    if (a.area() != b.area()) return a.area() > b.area();
    if (a.top != b.top) return a.top < b.top;
    if (a.left != b.left) return a.left < b.left;
    return a.width > b.width;
}

void check_rect_bounds(const Rect& r, std::size_t h, std::size_t w, const char* what) {
    check(r.height >= 1 && r.width >= 1, std::string(what) + ": empty rectangle");
    check(r.top + r.height <= h && r.left + r.width <= w,
          std::string(what) + ": rectangle exceeds image bounds");
}

}  // namespace

WarpResult apply_warp(const Tensor& image, const WarpField& warp) {
    check(image.rank() == 3, "apply_warp: image must be (c,h,w), got " + image.shape_str());
    check(warp.values.rank() == 3 && warp.values.dim(2) == 2,
          "apply_warp: warp must be (h,w,2), got " + warp.values.shape_str());
    const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
    check(warp.height() == h && warp.width() == w,
          "apply_warp: warp grid " + warp.values.shape_str() + " does not match image " +
              image.shape_str());

    WarpResult out{Tensor({c, h, w}), Tensor({h, w})};
    const double x_max = static_cast<double>(w - 1);
    const double y_max = static_cast<double>(h - 1);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const double x = warp.values.at(i, j, 0);
            const double y = warp.values.at(i, j, 1);
            if (!warp.valid_at(i, j) || x < 0.0 || x > x_max || y < 0.0 || y > y_max) continue;
            const std::size_t x0 = static_cast<std::size_t>(std::floor(x));
            const std::size_t y0 = static_cast<std::size_t>(std::floor(y));
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const std::size_t y1 = std::min(y0 + 1, h - 1);
            const double fx = x - static_cast<double>(x0);
            const double fy = y - static_cast<double>(y0);
            for (std::size_t ch = 0; ch < c; ++ch) {
                const double top =
                    (1.0 - fx) * image.at(ch, y0, x0) + fx * image.at(ch, y0, x1);
                const double bot =
                    (1.0 - fx) * image.at(ch, y1, x0) + fx * image.at(ch, y1, x1);
                out.image.at(ch, i, j) = (1.0 - fy) * top + fy * bot;
            }
            out.mask.at(i, j) = 1.0;
        }
    return out;
}

Rect largest_interior_rectangle(const Tensor& valid) {
    check_mask(valid);
    const std::size_t h = valid.dim(0), w = valid.dim(1);

    Rect best{};
    std::vector<std::size_t> heights(w, 0);
    std::vector<std::size_t> stack;
    stack.reserve(w + 1);

    // Histogram-of-heights sweep: every maximal-area rectangle is emitted as a
    // popped-bar candidate at its bottom row, so the tie-break below sees all
    // of them.
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t j = 0; j < w; ++j)
            heights[j] = valid.at(r, j) == 1.0 ? heights[j] + 1 : 0;

        stack.clear();
        for (std::size_t j = 0; j <= w; ++j) {
            const std::size_t cur = j < w ? heights[j] : 0;
            while (!stack.empty() && heights[stack.back()] > cur) {
                const std::size_t bar_h = heights[stack.back()];
                stack.pop_back();
                const std::size_t left = stack.empty() ? 0 : stack.back() + 1;
                const Rect cand{r + 1 - bar_h, left, bar_h, j - left};
                if (cand.area() > 0 && better(cand, best)) best = cand;
            }
            if (j < w) stack.push_back(j);
        }
    }

    check(best.area() > 0, "largest_interior_rectangle: mask has no valid pixel");
    return best;
}

Tensor crop_image(const Tensor& image, const Rect& rect) {
    check(image.rank() == 3, "crop_image: expected (c,h,w)");
    check_rect_bounds(rect, image.dim(1), image.dim(2), "crop_image");
    const std::size_t c = image.dim(0);
    Tensor out({c, rect.height, rect.width});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < rect.height; ++i)
            for (std::size_t j = 0; j < rect.width; ++j)
                out.at(ch, i, j) = image.at(ch, rect.top + i, rect.left + j);
    return out;
}

Tensor crop_plane(const Tensor& plane, const Rect& rect) {
    check(plane.rank() == 2, "crop_plane: expected (h,w)");
    check_rect_bounds(rect, plane.dim(0), plane.dim(1), "crop_plane");
    Tensor out({rect.height, rect.width});
    for (std::size_t i = 0; i < rect.height; ++i)
        for (std::size_t j = 0; j < rect.width; ++j)
            out.at(i, j) = plane.at(rect.top + i, rect.left + j);
    return out;
}

IntTensor crop_labels(const IntTensor& labels, const Rect& rect) {
    check(labels.rank() == 2, "crop_labels: expected (h,w)");
    check_rect_bounds(rect, labels.dim(0), labels.dim(1), "crop_labels");
    IntTensor out({rect.height, rect.width});
    for (std::size_t i = 0; i < rect.height; ++i)
        for (std::size_t j = 0; j < rect.width; ++j)
            out.at(i, j) = labels.at(rect.top + i, rect.left + j);
    return out;
}

AlignedPair crop_triple(const Tensor& source, const Tensor& warped_target,
                        const SegmentationMap& labels, const Tensor& confidence,
                        const Rect& rect) {
    return AlignedPair{crop_image(source, rect), crop_image(warped_target, rect),
                       SegmentationMap{crop_labels(labels.labels, rect), labels.num_classes},
                       crop_plane(confidence, rect)};
}

bool filter_pair(const Tensor& valid, double min_valid_fraction, std::size_t min_rect_side) {
    check_mask(valid);
    check(min_valid_fraction >= 0.0 && min_valid_fraction <= 1.0,
          "filter_pair: min_valid_fraction must be in [0,1]");
    std::size_t count = 0;
    for (double v : valid.vec()) count += v == 1.0 ? 1 : 0;
    if (count == 0) return false;
    const double fraction = static_cast<double>(count) / static_cast<double>(valid.numel());
    if (fraction < min_valid_fraction) return false;
    const Rect r = largest_interior_rectangle(valid);
    return r.height >= min_rect_side && r.width >= min_rect_side;
}

}  // namespace btseg::geometry
