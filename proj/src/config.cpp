#include "btseg/config.hpp"

#include <cstdio>
#include <set>

#include "btseg/errors.hpp"
#include "btseg/io.hpp"

namespace btseg::config {

namespace {

/// Rejects keys outside the section's schema; the diagnostic names both.
void check_keys(const nlohmann::json& j, const std::string& section,
                const std::set<std::string>& known) {
    if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw ConfigError("unknown key '" + key + "' in config section '" + section + "'");
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("bad value for config key '") + key + "'");
    }
}

}  // namespace

nn::ModelSpec RunConfig::model_spec() const {
    nn::ModelSpec spec;
    spec.encoder.stage_channels = model.stage_channels;
    spec.encoder.stage_strides = model.stage_strides;
    const std::size_t d = spec.encoder.fused_dim();
    if (model.projector_dims.empty())
        spec.projector.layer_dims = {d, std::max<std::size_t>(2, d / 2),
                                     std::max<std::size_t>(2, d / 4)};
    else
        spec.projector.layer_dims = model.projector_dims;
    spec.decoder.num_classes = static_cast<std::size_t>(scene.num_classes);
    spec.decoder.hidden_channels = model.decoder_hidden;
    spec.bn_momentum = model.bn_momentum;
    spec.bn_epsilon = model.bn_epsilon;
    spec.validate();
    return spec;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["scene"] = scene.to_json();
    j["dataset"] = {{"count", dataset.count}, {"train_fraction", dataset.train_fraction}};
    nlohmann::json t;
    t["total_steps"] = train.total_steps;
    t["effective_batch"] = train.effective_batch;
    t["alpha"] = train.alpha;
    t["warmup_steps"] = train.warmup_steps;
    t["stopgrad_steps"] = train.stopgrad_steps;
    t["lr_encoder"] = train.lr_encoder;
    t["lr_decoder"] = train.lr_decoder;
    t["lr_projector"] = train.lr_projector;
    t["weight_decay"] = train.weight_decay;
    t["crop_size"] = {train.crop_size.first, train.crop_size.second};
    t["flip_prob"] = train.flip_prob;
    t["use_bt"] = train.use_bt;
    t["use_warp"] = train.use_warp;
    t["use_crop"] = train.use_crop;
    t["pooling"] = train::to_string(train.pooling);
    t["mask_source"] = train::to_string(train.mask_source);
    t["lambda_bt"] = train.lambda_bt;
    t["bt_epsilon"] = train.bt_epsilon;
    t["pool_epsilon"] = train.pool_epsilon;
    t["min_valid_fraction"] = train.min_valid_fraction;
    t["min_rect_side"] = train.min_rect_side;
    t["seed"] = train.seed;
    t["checkpoint_every"] = train.checkpoint_every;
    t["threads"] = train.threads;
    j["train"] = t;
    nlohmann::json m;
    m["stage_channels"] = model.stage_channels;
    m["stage_strides"] = model.stage_strides;
    m["decoder_hidden"] = model.decoder_hidden;
    m["projector_dims"] = model.projector_dims;
    m["bn_momentum"] = model.bn_momentum;
    m["bn_epsilon"] = model.bn_epsilon;
    j["model"] = m;
    j["eval"] = {{"split", eval.split}, {"domain", eval.domain}};
    j["out"] = out_dir;
    return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    check_keys(j, "<root>", {"scene", "dataset", "train", "model", "eval", "out"});
    RunConfig c;

    if (j.contains("scene")) {
        const auto& s = j.at("scene");
        check_keys(s, "scene",
                   {"image_size", "num_classes", "mobile_class_ids", "corruption",
                    "corruption_strength", "max_shift_px", "mobile_object_count", "seed"});
        if (s.contains("image_size")) {
            const auto v = s.at("image_size").get<std::vector<std::size_t>>();
            if (v.size() != 2) throw ConfigError("bad value for config key 'image_size'");
            c.scene.height = v[0];
            c.scene.width = v[1];
        }
        read(s, "num_classes", c.scene.num_classes);
        if (s.contains("mobile_class_ids"))
            c.scene.mobile_class_ids = s.at("mobile_class_ids").get<std::set<std::int32_t>>();
        if (s.contains("corruption"))
            c.scene.corruption =
                synth::corruption_from_string(s.at("corruption").get<std::string>());
        read(s, "corruption_strength", c.scene.corruption_strength);
        read(s, "max_shift_px", c.scene.max_shift_px);
        read(s, "mobile_object_count", c.scene.mobile_object_count);
        read(s, "seed", c.scene.seed);
    }

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        check_keys(d, "dataset", {"count", "train_fraction"});
        read(d, "count", c.dataset.count);
        read(d, "train_fraction", c.dataset.train_fraction);
    }

    if (j.contains("train")) {
        const auto& t = j.at("train");
        check_keys(t, "train",
                   {"total_steps", "effective_batch", "alpha", "warmup_steps", "stopgrad_steps",
                    "lr_encoder", "lr_decoder", "lr_projector", "weight_decay", "crop_size",
                    "flip_prob", "use_bt", "use_warp", "use_crop", "pooling", "mask_source",
                    "lambda_bt", "bt_epsilon", "pool_epsilon", "min_valid_fraction",
                    "min_rect_side", "seed", "checkpoint_every", "threads"});
        read(t, "total_steps", c.train.total_steps);
        read(t, "effective_batch", c.train.effective_batch);
        read(t, "alpha", c.train.alpha);
        read(t, "warmup_steps", c.train.warmup_steps);
        read(t, "stopgrad_steps", c.train.stopgrad_steps);
        read(t, "lr_encoder", c.train.lr_encoder);
        read(t, "lr_decoder", c.train.lr_decoder);
        read(t, "lr_projector", c.train.lr_projector);
        read(t, "weight_decay", c.train.weight_decay);
        if (t.contains("crop_size")) {
            const auto v = t.at("crop_size").get<std::vector<std::size_t>>();
            if (v.size() != 2) throw ConfigError("bad value for config key 'crop_size'");
            c.train.crop_size = {v[0], v[1]};
        }
        read(t, "flip_prob", c.train.flip_prob);
        read(t, "use_bt", c.train.use_bt);
        read(t, "use_warp", c.train.use_warp);
        read(t, "use_crop", c.train.use_crop);
        if (t.contains("pooling"))
            c.train.pooling = train::pooling_from_string(t.at("pooling").get<std::string>());
        if (t.contains("mask_source"))
            c.train.mask_source =
                train::mask_source_from_string(t.at("mask_source").get<std::string>());
        read(t, "lambda_bt", c.train.lambda_bt);
        read(t, "bt_epsilon", c.train.bt_epsilon);
        read(t, "pool_epsilon", c.train.pool_epsilon);
        read(t, "min_valid_fraction", c.train.min_valid_fraction);
        read(t, "min_rect_side", c.train.min_rect_side);
        read(t, "seed", c.train.seed);
        read(t, "checkpoint_every", c.train.checkpoint_every);
        read(t, "threads", c.train.threads);
    }

    if (j.contains("model")) {
        const auto& m = j.at("model");
        check_keys(m, "model",
                   {"stage_channels", "stage_strides", "decoder_hidden", "projector_dims",
                    "bn_momentum", "bn_epsilon"});
        read(m, "stage_channels", c.model.stage_channels);
        read(m, "stage_strides", c.model.stage_strides);
        read(m, "decoder_hidden", c.model.decoder_hidden);
        read(m, "projector_dims", c.model.projector_dims);
        read(m, "bn_momentum", c.model.bn_momentum);
        read(m, "bn_epsilon", c.model.bn_epsilon);
    }

    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, "eval", {"split", "domain"});
        read(e, "split", c.eval.split);
        read(e, "domain", c.eval.domain);
        if (c.eval.split != "val" && c.eval.split != "train")
            throw ConfigError("bad value for config key 'split'");
        if (c.eval.domain != "target" && c.eval.domain != "source")
            throw ConfigError("bad value for config key 'domain'");
    }

    read(j, "out", c.out_dir);
    return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw IoError("config file not found: " + path.string());
    const std::string text = io::read_text_file(path);
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path.string());
    return from_json(j);
}

std::string RunConfig::fingerprint() const {
    // The output directory is where results go, not what gets computed;
    // reruns into different directories must fingerprint identically.
    nlohmann::json j = to_json();
    j.erase("out");
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(io::fnv1a64(j.dump())));
    return buf;
}

nlohmann::json model_spec_to_json(const nn::ModelSpec& spec) {
    nlohmann::json j;
    j["stage_channels"] = spec.encoder.stage_channels;
    j["stage_strides"] = spec.encoder.stage_strides;
    j["projector_dims"] = spec.projector.layer_dims;
    j["num_classes"] = spec.decoder.num_classes;
    j["decoder_hidden"] = spec.decoder.hidden_channels;
    j["bn_momentum"] = spec.bn_momentum;
    j["bn_epsilon"] = spec.bn_epsilon;
    return j;
}

nn::ModelSpec model_spec_from_json(const nlohmann::json& j) {
    nn::ModelSpec spec;
    spec.encoder.stage_channels = j.at("stage_channels").get<std::vector<std::size_t>>();
    spec.encoder.stage_strides = j.at("stage_strides").get<std::vector<std::size_t>>();
    spec.projector.layer_dims = j.at("projector_dims").get<std::vector<std::size_t>>();
    spec.decoder.num_classes = j.at("num_classes").get<std::size_t>();
    spec.decoder.hidden_channels = j.at("decoder_hidden").get<std::size_t>();
    spec.bn_momentum = j.at("bn_momentum").get<double>();
    spec.bn_epsilon = j.at("bn_epsilon").get<double>();
    spec.validate();
    return spec;
}

}  // namespace btseg::config
