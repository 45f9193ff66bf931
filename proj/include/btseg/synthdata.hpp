#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "btseg/geometry.hpp"
#include "btseg/tensor.hpp"
#include "btseg/types.hpp"

namespace btseg::synth {

enum class Corruption { darken, fog_blend, noise, desaturate };

Corruption corruption_from_string(const std::string& s);
std::string to_string(Corruption c);

struct SceneSpec {
    std::size_t height = 96;
    std::size_t width = 96;
    int num_classes = 6;
    std::set<std::int32_t> mobile_class_ids = {4, 5};
    Corruption corruption = Corruption::fog_blend;
    double corruption_strength = 0.6;
    std::size_t max_shift_px = 4;
    std::size_t mobile_object_count = 3;
    std::uint64_t seed = 1;

    void validate() const;
    nlohmann::json to_json() const;
    static SceneSpec from_json(const nlohmann::json& j);
};

/// One clear/adverse pair of the same scene. The warp maps the target frame
/// back into the source frame; adverse labels exist only for evaluation.
struct PairedSample {
    Tensor source;                           // (3,h,w), clear appearance
    Tensor target;                           // (3,h,w), shifted + corrupted
    SegmentationMap source_labels;           // (h,w)
    geometry::WarpField warp;                // target -> source alignment
    Tensor confidence;                       // (h,w) in [0,1]
    SegmentationMap adverse_labels_heldout;  // (h,w), evaluation only
};

/// Deterministic in (spec.seed, index).
PairedSample generate_pair(const SceneSpec& spec, std::size_t index);

struct ManifestEntry {
    std::size_t index = 0;
    std::string split;  // "train" | "val"
    std::string dir;    // relative to the dataset root
    std::vector<std::pair<std::string, std::string>> checksums;  // file -> fnv1a64 hex
};

struct Manifest {
    SceneSpec spec;
    std::size_t count = 0;
    double train_fraction = 0.75;
    std::vector<ManifestEntry> entries;
    std::string fingerprint;

    nlohmann::json to_json() const;
    static Manifest from_json(const nlohmann::json& j);
};

/// Writes `<root>/{train,val}/<index>/{source,target,labels,adverse_labels,
/// warp,conf}` plus `manifest.json` at the root. Regeneration with the same
/// spec produces identical checksums.
Manifest write_dataset(const SceneSpec& spec, std::size_t count, double train_fraction,
                       const std::filesystem::path& root);

struct Dataset {
    SceneSpec spec;
    std::vector<PairedSample> train;
    std::vector<PairedSample> val;
    std::string fingerprint;
};

/// Loads a dataset written by write_dataset; values are the quantized on-disk
/// ones, so training is independent of whether data was freshly generated.
Dataset load_dataset(const std::filesystem::path& root);

}  // namespace btseg::synth
