#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "btseg/errors.hpp"
#include "btseg/geometry.hpp"
#include "btseg/io.hpp"
#include "btseg/synthdata.hpp"

using namespace btseg;
namespace fs = std::filesystem;

namespace {

synth::SceneSpec small_spec() {
    synth::SceneSpec spec;
    spec.height = 48;
    spec.width = 48;
    spec.num_classes = 6;
    spec.mobile_class_ids = {4, 5};
    spec.corruption = synth::Corruption::fog_blend;
    spec.corruption_strength = 0.5;
    spec.max_shift_px = 3;
    spec.mobile_object_count = 2;
    spec.seed = 11;
    return spec;
}

double image_mad(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += std::fabs(a[i] - b[i]);
    return s / static_cast<double>(a.numel());
}

/// The shift is recoverable from any valid warp entry: (x - j, y - i).
std::pair<std::ptrdiff_t, std::ptrdiff_t> implied_shift(const geometry::WarpField& warp) {
    for (std::size_t i = 0; i < warp.height(); ++i)
        for (std::size_t j = 0; j < warp.width(); ++j)
            if (warp.valid_at(i, j))
                return {static_cast<std::ptrdiff_t>(warp.values.at(i, j, 0)) -
                            static_cast<std::ptrdiff_t>(j),
                        static_cast<std::ptrdiff_t>(warp.values.at(i, j, 1)) -
                            static_cast<std::ptrdiff_t>(i)};
    return {0, 0};
}

}  // namespace

TEST_CASE("generate_pair: zero shift and zero strength give an identical pair") {
    synth::SceneSpec spec = small_spec();
    spec.max_shift_px = 0;
    spec.corruption_strength = 0.0;
    const auto sample = synth::generate_pair(spec, 0);
    for (std::size_t i = 0; i < sample.source.numel(); ++i)
        CHECK(sample.source[i] == sample.target[i]);
    for (double v : sample.confidence.vec()) CHECK(v == 1.0);
    for (std::size_t i = 0; i < sample.source_labels.labels.numel(); ++i)
        CHECK(sample.source_labels.labels[i] == sample.adverse_labels_heldout.labels[i]);
}

TEST_CASE("generate_pair: bit-identical on repeated calls") {
    const synth::SceneSpec spec = small_spec();
    const auto a = synth::generate_pair(spec, 3);
    const auto b = synth::generate_pair(spec, 3);
    CHECK(a.source.vec() == b.source.vec());
    CHECK(a.target.vec() == b.target.vec());
    CHECK(a.warp.values.vec() == b.warp.values.vec());
    CHECK(a.confidence.vec() == b.confidence.vec());
    CHECK(a.source_labels.labels.vec() == b.source_labels.labels.vec());
}

TEST_CASE("generate_pair: warp reproduces static source labels exactly") {
    const synth::SceneSpec spec = small_spec();
    bool found_shift = false;
    std::size_t mismatches = 0;
    std::size_t compared = 0;
    for (std::size_t index = 0; index < 300 && !(found_shift && index > 16); ++index) {
        const auto sample = synth::generate_pair(spec, index);
        const auto [dx, dy] = implied_shift(sample.warp);
        // A pure 3-px horizontal viewpoint shift appears as warp offset -3.
        if (dx == -3 && dy == 0) found_shift = true;

        // Labels as a 1-channel image; integer-coordinate warps sample exactly.
        Tensor lab_img({1, spec.height, spec.width});
        for (std::size_t i = 0; i < lab_img.numel(); ++i)
            lab_img[i] = static_cast<double>(sample.adverse_labels_heldout.labels[i]);
        const auto warped = geometry::apply_warp(lab_img, sample.warp);
        for (std::size_t i = 0; i < spec.height; ++i)
            for (std::size_t j = 0; j < spec.width; ++j) {
                if (warped.mask.at(i, j) != 1.0) continue;
                if (sample.confidence.at(i, j) != 1.0) continue;  // moving content
                ++compared;
                if (warped.image.at(0, i, j) !=
                    static_cast<double>(sample.source_labels.labels.at(i, j)))
                    ++mismatches;
            }
    }
    CHECK(found_shift);
    CHECK(compared > 0);
    CHECK(mismatches == 0);
}

TEST_CASE("generate_pair: corruption shifts pixel statistics but not labels") {
    synth::SceneSpec spec = small_spec();
    for (const auto type : {synth::Corruption::darken, synth::Corruption::fog_blend,
                            synth::Corruption::noise, synth::Corruption::desaturate}) {
        spec.corruption = type;
        spec.max_shift_px = 0;  // isolate the appearance change
        spec.corruption_strength = 0.6;
        const auto sample = synth::generate_pair(spec, 1);
        CHECK(image_mad(sample.source, sample.target) > 0.0);
        for (std::size_t i = 0; i < sample.source_labels.labels.numel(); ++i)
            CHECK(sample.source_labels.labels[i] == sample.adverse_labels_heldout.labels[i]);
    }
}

TEST_CASE("generate_pair: labels are valid and scenes contain at least two classes") {
    const synth::SceneSpec spec = small_spec();
    for (std::size_t index = 0; index < 8; ++index) {
        const auto sample = synth::generate_pair(spec, index);
        std::set<std::int32_t> seen;
        for (auto v : sample.source_labels.labels.vec()) {
            CHECK(v >= 0);
            CHECK(v < spec.num_classes);
            seen.insert(v);
        }
        CHECK(seen.size() >= 2);
    }
}

TEST_CASE("generate_pair: a mobile object moves when the shift budget allows") {
    synth::SceneSpec spec = small_spec();
    spec.mobile_object_count = 1;
    spec.mobile_class_ids = {4};
    for (std::size_t index = 0; index < 4; ++index) {
        const auto sample = synth::generate_pair(spec, index);
        double sx = 0, sy = 0, sn = 0, tx = 0, ty = 0, tn = 0;
        for (std::size_t i = 0; i < spec.height; ++i)
            for (std::size_t j = 0; j < spec.width; ++j) {
                if (sample.source_labels.labels.at(i, j) == 4) {
                    sy += static_cast<double>(i);
                    sx += static_cast<double>(j);
                    ++sn;
                }
                if (sample.adverse_labels_heldout.labels.at(i, j) == 4) {
                    ty += static_cast<double>(i);
                    tx += static_cast<double>(j);
                    ++tn;
                }
            }
        REQUIRE(sn > 0);
        REQUIRE(tn > 0);
        // Undo the viewpoint shift so only the object's own motion remains;
        // the warp stores source->target coordinates, so the view shift is
        // the negative of the implied warp offset.
        const auto [dx, dy] = implied_shift(sample.warp);
        const double cx_t = tx / tn - static_cast<double>(dx);
        const double cy_t = ty / tn - static_cast<double>(dy);
        const double dist =
            std::hypot(cx_t - sx / sn, cy_t - sy / sn);
        CHECK(dist >= 1.0 - 1e-9);
    }
}

TEST_CASE("generate_pair: confidence is low exactly on mismatched or out-of-frame pixels") {
    const synth::SceneSpec spec = small_spec();
    const auto sample = synth::generate_pair(spec, 2);
    bool saw_low = false;
    for (double v : sample.confidence.vec()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        if (v < 0.3) saw_low = true;
    }
    CHECK(saw_low);  // with a 2-object scene and nonzero shifts some pixels mismatch
}

TEST_CASE("write_dataset: count 0 emits a valid empty manifest") {
    const auto root = fs::temp_directory_path() / "btseg_ds_empty";
    fs::remove_all(root);
    const auto manifest = synth::write_dataset(small_spec(), 0, 0.75, root);
    CHECK(manifest.entries.empty());
    CHECK(fs::exists(root / "manifest.json"));
    const auto ds = synth::load_dataset(root);
    CHECK(ds.train.empty());
    CHECK(ds.val.empty());
    fs::remove_all(root);
}

TEST_CASE("write_dataset: split arithmetic 8 x 0.75 -> 6 train + 2 val") {
    const auto root = fs::temp_directory_path() / "btseg_ds_split";
    fs::remove_all(root);
    synth::SceneSpec spec = small_spec();
    const auto manifest = synth::write_dataset(spec, 8, 0.75, root);
    std::size_t train = 0, val = 0;
    for (const auto& e : manifest.entries) (e.split == "train" ? train : val)++;
    CHECK(train == 6);
    CHECK(val == 2);
    const auto ds = synth::load_dataset(root);
    CHECK(ds.train.size() == 6);
    CHECK(ds.val.size() == 2);
    fs::remove_all(root);
}

TEST_CASE("write_dataset: regeneration reproduces identical checksums") {
    const auto root_a = fs::temp_directory_path() / "btseg_ds_a";
    const auto root_b = fs::temp_directory_path() / "btseg_ds_b";
    fs::remove_all(root_a);
    fs::remove_all(root_b);
    const auto ma = synth::write_dataset(small_spec(), 4, 0.5, root_a);
    const auto mb = synth::write_dataset(small_spec(), 4, 0.5, root_b);
    REQUIRE(ma.entries.size() == mb.entries.size());
    for (std::size_t i = 0; i < ma.entries.size(); ++i)
        CHECK(ma.entries[i].checksums == mb.entries[i].checksums);
    CHECK(io::read_text_file(root_a / "manifest.json") ==
          io::read_text_file(root_b / "manifest.json"));
    fs::remove_all(root_a);
    fs::remove_all(root_b);
}

TEST_CASE("load_dataset: on-disk values round-trip the quantized data") {
    const auto root = fs::temp_directory_path() / "btseg_ds_rt";
    fs::remove_all(root);
    synth::write_dataset(small_spec(), 2, 1.0, root);
    const auto ds = synth::load_dataset(root);
    REQUIRE(ds.train.size() == 2);
    const auto fresh = synth::generate_pair(small_spec(), 0);
    const auto& loaded = ds.train[0];
    // Quantization error is at most half a step of 1/255.
    for (std::size_t i = 0; i < fresh.source.numel(); ++i)
        CHECK(std::fabs(fresh.source[i] - loaded.source[i]) <= 0.5 / 255.0 + 1e-12);
    CHECK(fresh.source_labels.labels.vec() == loaded.source_labels.labels.vec());
    // Warp singles round-trip exactly through float32 for integer coordinates.
    CHECK(fresh.warp.values.vec() == loaded.warp.values.vec());
    fs::remove_all(root);
}

TEST_CASE("scene spec validation") {
    synth::SceneSpec spec = small_spec();
    spec.corruption_strength = 1.5;
    CHECK_THROWS_AS(spec.validate(), ValueError);
    spec = small_spec();
    spec.max_shift_px = 12;  // >= min(h,w)/4
    CHECK_THROWS_AS(spec.validate(), ValueError);
    spec = small_spec();
    spec.mobile_class_ids = {0, 1, 2, 3, 4};  // leaves fewer than 2 static classes
    CHECK_THROWS_AS(spec.validate(), ValueError);
}
