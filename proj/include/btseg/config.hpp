#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "btseg/model.hpp"
#include "btseg/synthdata.hpp"
#include "btseg/trainer.hpp"

namespace btseg::config {

struct DatasetConfig {
    std::size_t count = 80;
    double train_fraction = 0.8;
};

struct ModelConfig {
    std::vector<std::size_t> stage_channels{16, 32};
    std::vector<std::size_t> stage_strides{4, 8};
    std::size_t decoder_hidden = 24;
    std::vector<std::size_t> projector_dims;  // empty -> [d, d/2, d/4]
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;
};

struct EvalConfig {
    std::string split = "val";     // "val" | "train"
    std::string domain = "target";  // "target" | "source"
};

/// The declarative run document. Unknown keys are rejected; every emitted
/// artifact embeds fingerprint() so reruns are attributable to their config.
struct RunConfig {
    synth::SceneSpec scene;
    DatasetConfig dataset;
    train::TrainConfig train;
    ModelConfig model;
    EvalConfig eval;
    std::string out_dir = "runs/default";

    nn::ModelSpec model_spec() const;

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
    std::string fingerprint() const;
};

nlohmann::json model_spec_to_json(const nn::ModelSpec& spec);
nn::ModelSpec model_spec_from_json(const nlohmann::json& j);

}  // namespace btseg::config
