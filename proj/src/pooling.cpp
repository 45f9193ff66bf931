#include "btseg/pooling.hpp"

#include <algorithm>
#include <vector>

#include "btseg/errors.hpp"

namespace btseg::pooling {

namespace {

void check_feature_map(const Tensor& y) {
    check(y.rank() == 4, "pooling: feature map must be (b,d,m,n), got " + y.shape_str());
    check(y.dim(2) >= 1 && y.dim(3) >= 1, "pooling: empty spatial grid");
}

void check_weight_plane(const Tensor& y, const Tensor& w, const char* what) {
    check(w.rank() == 3, std::string("pooling: ") + what + " must be (b,m,n), got " + w.shape_str());
    check(w.dim(0) == y.dim(0) && w.dim(1) == y.dim(2) && w.dim(2) == y.dim(3),
          std::string("pooling: ") + what + " shape " + w.shape_str() +
              " does not match feature map " + y.shape_str());
}

/// Generic weighted pool: out[b][d] = sum_ij Y*W / (sum_ij W + eps).
Tensor weighted_pool(const Tensor& y, const Tensor& w, double epsilon) {
    const std::size_t b = y.dim(0), d = y.dim(1), m = y.dim(2), n = y.dim(3);
    Tensor out({b, d});
    for (std::size_t s = 0; s < b; ++s) {
        double denom = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) denom += w.at(s, i, j);
        denom += epsilon;
        for (std::size_t c = 0; c < d; ++c) {
            double num = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) num += y.at(s, c, i, j) * w.at(s, i, j);
            out.at(s, c) = num / denom;
        }
    }
    return out;
}

}  // namespace

Tensor average_pool(const Tensor& y) {
    check_feature_map(y);
    const std::size_t b = y.dim(0), d = y.dim(1), m = y.dim(2), n = y.dim(3);
    Tensor out({b, d});
    const double inv = 1.0 / static_cast<double>(m * n);
    for (std::size_t s = 0; s < b; ++s)
        for (std::size_t c = 0; c < d; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) acc += y.at(s, c, i, j);
            out.at(s, c) = acc * inv;
        }
    return out;
}

Tensor mask_from_segmentation(const SegmentationMap& s, const std::set<std::int32_t>& mobile_classes,
                              std::pair<std::size_t, std::size_t> target_grid) {
    check(s.labels.rank() == 3, "mask_from_segmentation: labels must be (b,h,w)");
    check(s.num_classes >= 2, "mask_from_segmentation: need at least 2 classes");
    for (auto cls : mobile_classes)
        check(cls >= 0 && cls < s.num_classes,
              "mask_from_segmentation: unknown class id " + std::to_string(cls) +
                  " in mobile class set");

    const std::size_t b = s.labels.dim(0), h = s.labels.dim(1), w = s.labels.dim(2);
    const auto [m, n] = target_grid;
    check(m >= 1 && n >= 1 && h % m == 0 && w % n == 0,
          "mask_from_segmentation: target grid must divide the label resolution");
    const std::size_t bh = h / m, bw = w / n;

    Tensor mask({b, m, n});
    std::vector<std::size_t> votes(static_cast<std::size_t>(s.num_classes) + 1);
    for (std::size_t im = 0; im < b; ++im)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                std::fill(votes.begin(), votes.end(), 0);
                for (std::size_t y = i * bh; y < (i + 1) * bh; ++y)
                    for (std::size_t x = j * bw; x < (j + 1) * bw; ++x) {
                        const auto lab = s.labels.at(im, y, x);
                        if (lab == SegmentationMap::kIgnoreIndex) continue;
                        check(lab >= 0 && lab < s.num_classes,
                              "mask_from_segmentation: label out of range: " + std::to_string(lab));
                        ++votes[static_cast<std::size_t>(lab)];
                    }
                // Smallest id wins ties; an all-ignored block counts as static.
                std::int32_t winner = -1;
                std::size_t best = 0;
                for (std::int32_t cls = 0; cls < s.num_classes; ++cls)
                    if (votes[static_cast<std::size_t>(cls)] > best) {
                        best = votes[static_cast<std::size_t>(cls)];
                        winner = cls;
                    }
                const bool mobile = winner >= 0 && mobile_classes.count(winner) > 0;
                mask.at(im, i, j) = mobile ? 0.0 : 1.0;
            }
    return mask;
}

Tensor masked_average_pool(const Tensor& y, const Tensor& b_mask, double epsilon) {
    check_feature_map(y);
    check_weight_plane(y, b_mask, "mask");
    check(epsilon > 0.0, "masked_average_pool: epsilon must be positive");
    for (double v : b_mask.vec())
        check(v == 0.0 || v == 1.0, "masked_average_pool: mask entries must be exactly 0 or 1");
    return weighted_pool(y, b_mask, epsilon);
}

Tensor confidence_average_pool(const Tensor& y, const Tensor& p, double epsilon) {
    check_feature_map(y);
    check_weight_plane(y, p, "confidence");
    check(epsilon > 0.0, "confidence_average_pool: epsilon must be positive");
    for (double v : p.vec())
        check(v >= 0.0 && v <= 1.0, "confidence_average_pool: confidence outside [0,1]");
    return weighted_pool(y, p, epsilon);
}

Tensor segconf_average_pool(const Tensor& y, const Tensor& b_mask, const Tensor& p,
                            double epsilon) {
    check_feature_map(y);
    check_weight_plane(y, b_mask, "mask");
    check_weight_plane(y, p, "confidence");
    check(epsilon > 0.0, "segconf_average_pool: epsilon must be positive");
    Tensor w(b_mask.shape());
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = b_mask[i] * p[i];
    return weighted_pool(y, w, epsilon);
}

Tensor downsample_block_mean(const Tensor& plane, std::pair<std::size_t, std::size_t> target_grid) {
    check(plane.rank() == 3, "downsample_block_mean: plane must be (b,h,w)");
    const std::size_t b = plane.dim(0), h = plane.dim(1), w = plane.dim(2);
    const auto [m, n] = target_grid;
    check(m >= 1 && n >= 1 && h % m == 0 && w % n == 0,
          "downsample_block_mean: target grid must divide the plane resolution");
    const std::size_t bh = h / m, bw = w / n;
    const double inv = 1.0 / static_cast<double>(bh * bw);
    Tensor out({b, m, n});
    for (std::size_t s = 0; s < b; ++s)
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t y = i * bh; y < (i + 1) * bh; ++y)
                    for (std::size_t x = j * bw; x < (j + 1) * bw; ++x) acc += plane.at(s, y, x);
                out.at(s, i, j) = acc * inv;
            }
    return out;
}

Tensor pool_backward(const Tensor& g_pooled, const Tensor& weights,
                     const std::vector<std::size_t>& feature_shape, double epsilon) {
    check(g_pooled.rank() == 2, "pool_backward: upstream gradient must be (b,d)");
    check(feature_shape.size() == 4, "pool_backward: feature shape must be (b,d,m,n)");
    const std::size_t b = feature_shape[0], d = feature_shape[1], m = feature_shape[2],
                      n = feature_shape[3];
    check(g_pooled.dim(0) == b && g_pooled.dim(1) == d, "pool_backward: gradient shape mismatch");

    Tensor g_y(feature_shape);
    for (std::size_t s = 0; s < b; ++s) {
        double denom;
        if (weights.empty()) {
            denom = static_cast<double>(m * n);
        } else {
            denom = epsilon;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) denom += weights.at(s, i, j);
        }
        const double inv = 1.0 / denom;
        for (std::size_t c = 0; c < d; ++c) {
            const double g = g_pooled.at(s, c) * inv;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    g_y.at(s, c, i, j) = weights.empty() ? g : g * weights.at(s, i, j);
        }
    }
    return g_y;
}

}  // namespace btseg::pooling
