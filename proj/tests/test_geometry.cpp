#include <doctest.h>

#include "btseg/errors.hpp"
#include "btseg/geometry.hpp"
#include "btseg/reference.hpp"
#include "btseg/rng.hpp"

using namespace btseg;
using geometry::Rect;
using geometry::WarpField;

namespace {

WarpField identity_warp(std::size_t h, std::size_t w) {
    WarpField warp{Tensor({h, w, 2})};
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            warp.values.at(i, j, 0) = static_cast<double>(j);
            warp.values.at(i, j, 1) = static_cast<double>(i);
        }
    return warp;
}

WarpField shift_warp(std::size_t h, std::size_t w, std::ptrdiff_t dx, std::ptrdiff_t dy) {
    // Output pixel (i, j) samples the input at (j + dx, i + dy); out-of-frame
    // entries carry the (0,0) sentinel.
    WarpField warp{Tensor({h, w, 2})};
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j) + dx;
            const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i) + dy;
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(w) || y < 0 ||
                y >= static_cast<std::ptrdiff_t>(h))
                continue;
            if (x == 0 && y == 0) continue;  // sentinel-reserved corner
            warp.values.at(i, j, 0) = static_cast<double>(x);
            warp.values.at(i, j, 1) = static_cast<double>(y);
        }
    return warp;
}

Tensor ramp_image(std::size_t h, std::size_t w) {
    Tensor img({1, h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            img.at(0, i, j) = static_cast<double>(i * w + j) * 0.01;
    return img;
}

Tensor random_mask(Rng& rng, std::size_t h, std::size_t w, double density) {
    Tensor mask({h, w});
    for (auto& v : mask.vec()) v = rng.bernoulli(density) ? 1.0 : 0.0;
    return mask;
}

}  // namespace

TEST_CASE("apply_warp: identity warp reproduces the input away from the sentinel corner") {
    const Tensor img = ramp_image(4, 5);
    const auto out = geometry::apply_warp(img, identity_warp(4, 5));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            if (i == 0 && j == 0) continue;  // genuine (0,0) sample is unrepresentable
            CHECK(out.image.at(0, i, j) == img.at(0, i, j));
            CHECK(out.mask.at(i, j) == 1.0);
        }
}

TEST_CASE("apply_warp: +1 horizontal shift samples the right neighbor, last column invalid") {
    const Tensor img = ramp_image(3, 4);
    const auto out = geometry::apply_warp(img, shift_warp(3, 4, 1, 0));
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j + 1 < 4; ++j) {
            CHECK(out.mask.at(i, j) == 1.0);
            CHECK(out.image.at(0, i, j) == doctest::Approx(img.at(0, i, j + 1)).epsilon(1e-12));
        }
        CHECK(out.mask.at(i, 3) == 0.0);
        CHECK(out.image.at(0, i, 3) == 0.0);
    }
}

TEST_CASE("apply_warp: all-sentinel warp zeroes image and mask") {
    const Tensor img = ramp_image(3, 3);
    const WarpField warp{Tensor({3, 3, 2})};
    const auto out = geometry::apply_warp(img, warp);
    for (double v : out.image.vec()) CHECK(v == 0.0);
    for (double v : out.mask.vec()) CHECK(v == 0.0);
}

TEST_CASE("apply_warp: fractional coordinates bilinearly interpolate") {
    Tensor img({1, 2, 2}, {0.0, 1.0, 2.0, 3.0});
    WarpField warp{Tensor({2, 2, 2})};
    warp.values.at(0, 0, 0) = 0.5;
    warp.values.at(0, 0, 1) = 0.5;
    const auto out = geometry::apply_warp(img, warp);
    CHECK(out.image.at(0, 0, 0) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(out.mask.at(0, 0) == 1.0);
}

TEST_CASE("apply_warp: rejects mismatched grids") {
    const Tensor img = ramp_image(3, 3);
    CHECK_THROWS_AS(geometry::apply_warp(img, identity_warp(4, 3)), ValueError);
}

TEST_CASE("largest_interior_rectangle: all-ones mask") {
    CHECK(geometry::largest_interior_rectangle(Tensor::full({4, 4}, 1.0)) == Rect{0, 0, 4, 4});
}

TEST_CASE("largest_interior_rectangle: two corner holes force the 2x3 bottom block") {
    Tensor mask = Tensor::full({3, 3}, 1.0);
    mask.at(0, 0) = 0.0;
    mask.at(0, 1) = 0.0;
    const Rect r = geometry::largest_interior_rectangle(mask);
    CHECK(r == Rect{1, 0, 2, 3});
    CHECK(r.area() == 6);
}

TEST_CASE("largest_interior_rectangle: single valid pixel") {
    Tensor mask({4, 4});
    mask.at(2, 1) = 1.0;
    CHECK(geometry::largest_interior_rectangle(mask) == Rect{2, 1, 1, 1});
}

TEST_CASE("largest_interior_rectangle: rejects all-zero masks") {
    CHECK_THROWS_AS(geometry::largest_interior_rectangle(Tensor({3, 3})), ValueError);
}

TEST_CASE("invariant: LIR area equals brute force and the rectangle is all-valid") {
    // 200 seeded random masks up to 24x24.
    std::size_t checked = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng rng(mix_seed(0x11A, s));
        const std::size_t h = 1 + static_cast<std::size_t>(rng.uniform_int(0, 23));
        const std::size_t w = 1 + static_cast<std::size_t>(rng.uniform_int(0, 23));
        Tensor mask = random_mask(rng, h, w, rng.uniform(0.2, 0.95));
        bool any = false;
        for (double v : mask.vec()) any = any || v == 1.0;
        if (!any) mask.at(h / 2, w / 2) = 1.0;

        const Rect r = geometry::largest_interior_rectangle(mask);
        CHECK(r.area() == ref::lir_brute_force_area(mask));
        for (std::size_t i = r.top; i < r.top + r.height; ++i)
            for (std::size_t j = r.left; j < r.left + r.width; ++j)
                REQUIRE(mask.at(i, j) == 1.0);
        ++checked;
    }
    CHECK(checked == 200);
}

TEST_CASE("invariant: integer shift warps round-trip on the jointly valid region") {
    const Tensor img = ramp_image(6, 6);
    const auto fwd = geometry::apply_warp(img, shift_warp(6, 6, 2, 1));
    const auto back = geometry::apply_warp(fwd.image, shift_warp(6, 6, -2, -1));
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            // Jointly valid: the round trip must land on a pixel that was
            // itself validly warped.
            const std::ptrdiff_t bi = static_cast<std::ptrdiff_t>(i) - 1;
            const std::ptrdiff_t bj = static_cast<std::ptrdiff_t>(j) - 2;
            if (back.mask.at(i, j) != 1.0) continue;
            if (bi < 0 || bj < 0 || fwd.mask.at(static_cast<std::size_t>(bi),
                                                static_cast<std::size_t>(bj)) != 1.0)
                continue;
            CHECK(back.image.at(0, i, j) == img.at(0, i, j));
        }
}

TEST_CASE("crop_triple: full-image rectangle is the identity") {
    const Tensor src = ramp_image(4, 4);
    const Tensor tgt = ramp_image(4, 4);
    SegmentationMap labels{IntTensor::full({4, 4}, 2), 6};
    const Tensor conf = Tensor::full({4, 4}, 1.0);
    const auto pair = geometry::crop_triple(src, tgt, labels, conf, Rect{0, 0, 4, 4});
    CHECK(pair.source.vec() == src.vec());
    CHECK(pair.target.vec() == tgt.vec());
    CHECK(pair.labels.labels.vec() == labels.labels.vec());
    CHECK(pair.confidence.vec() == conf.vec());
}

TEST_CASE("crop_triple: interior rectangle preserves content offsets") {
    const Tensor src = ramp_image(4, 4);
    IntTensor lab({4, 4});
    for (std::size_t i = 0; i < 16; ++i) lab[i] = static_cast<std::int32_t>(i % 6);
    const auto pair = geometry::crop_triple(src, src, {lab, 6}, Tensor::full({4, 4}, 0.5),
                                            Rect{1, 1, 2, 2});
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(pair.source.at(0, i, j) == src.at(0, i + 1, j + 1));
            CHECK(pair.labels.labels.at(i, j) == lab.at(i + 1, j + 1));
        }
}

TEST_CASE("crop_triple: 1x1 rectangle and out-of-bounds rejection") {
    const Tensor src = ramp_image(4, 4);
    SegmentationMap labels{IntTensor({4, 4}), 6};
    const Tensor conf = Tensor::full({4, 4}, 1.0);
    const auto pair = geometry::crop_triple(src, src, labels, conf, Rect{3, 3, 1, 1});
    CHECK(pair.source.shape() == std::vector<std::size_t>{1, 1, 1});
    CHECK_THROWS_AS(geometry::crop_triple(src, src, labels, conf, Rect{3, 3, 2, 2}), ValueError);
}

TEST_CASE("filter_pair: thresholds on validity fraction and rectangle side") {
    CHECK(geometry::filter_pair(Tensor::full({8, 8}, 1.0), 0.9, 8));
    CHECK_FALSE(geometry::filter_pair(Tensor({8, 8}), 0.0, 1));

    // 10x10 with 40 valid pixels: fraction 0.4 < 0.5.
    Tensor mask({10, 10});
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 10; ++j) mask.at(i, j) = 1.0;
    CHECK_FALSE(geometry::filter_pair(mask, 0.5, 1));
    CHECK(geometry::filter_pair(mask, 0.4, 4));
    CHECK_FALSE(geometry::filter_pair(mask, 0.4, 5));  // LIR is 4x10
}
