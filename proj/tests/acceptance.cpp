// Acceptance suite: one line per criterion, exit 0 iff every executed
// criterion passes. `--only N` / `--skip N` select subsets (the adaptation
// study in criterion 6 trains 9 desk-scale runs and dominates the runtime).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "btseg/bt_core.hpp"
#include "btseg/config.hpp"
#include "btseg/errors.hpp"
#include "btseg/io.hpp"
#include "btseg/metrics.hpp"
#include "btseg/model.hpp"
#include "btseg/reference.hpp"
#include "btseg/rng.hpp"
#include "btseg/selfcheck.hpp"
#include "btseg/synthdata.hpp"
#include "btseg/trainer.hpp"

using namespace btseg;
namespace fs = std::filesystem;

namespace {

struct Criterion {
    int id;
    std::string summary;
    std::function<bool(std::string&)> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(BTSEG_CLI_PATH) + " " + args;
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool files_identical(const fs::path& a, const fs::path& b) {
    const auto ba = io::read_file_bytes(a);
    const auto bb = io::read_file_bytes(b);
    return ba == bb;
}

// ---- criterion 1: kernel oracle suite ----

bool criterion_kernel_oracles(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = selfcheck::run_oracle_checks();
    bool ok = true;
    double worst = 0.0;
    for (const auto& r : results) {
        if (r.name.find("largest_interior_rectangle") != std::string::npos) continue;
        ok = ok && r.pass;
        worst = std::max(worst, r.max_rel_err);
    }
    const double elapsed = seconds_since(t0);
    ok = ok && elapsed < 60.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "50 seeded instances per kernel, max rel err %.3e (tol 1e-9), %.1fs", worst,
                  elapsed);
    detail = buf;
    return ok;
}

// ---- criterion 2: gradient suite ----

bool criterion_gradients(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = selfcheck::run_gradient_checks();
    bool ok = true;
    double worst_kernel = 0.0, worst_e2e = 0.0;
    for (const auto& r : results) {
        ok = ok && r.pass;
        if (r.name.find("end-to-end") != std::string::npos)
            worst_e2e = std::max(worst_e2e, r.max_rel_err);
        else
            worst_kernel = std::max(worst_kernel, r.max_rel_err);
    }
    const double elapsed = seconds_since(t0);
    ok = ok && elapsed < 300.0;
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "kernels max rel err %.3e (tol 1e-4), end-to-end %.3e (tol 1e-3), %.1fs",
                  worst_kernel, worst_e2e, elapsed);
    detail = buf;
    return ok;
}

// ---- criterion 3: LIR oracle ----

bool criterion_lir(std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    std::size_t failures = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Rng rng(mix_seed(0xACC3, s));
        const std::size_t h = 1 + static_cast<std::size_t>(rng.uniform_int(0, 23));
        const std::size_t w = 1 + static_cast<std::size_t>(rng.uniform_int(0, 23));
        Tensor mask({h, w});
        const double density = rng.uniform(0.15, 0.95);
        bool any = false;
        for (auto& v : mask.vec()) {
            v = rng.bernoulli(density) ? 1.0 : 0.0;
            any = any || v == 1.0;
        }
        if (!any) mask.at(h / 2, w / 2) = 1.0;
        const auto rect = geometry::largest_interior_rectangle(mask);
        bool ok = rect.area() == ref::lir_brute_force_area(mask);
        for (std::size_t i = rect.top; ok && i < rect.top + rect.height; ++i)
            for (std::size_t j = rect.left; ok && j < rect.left + rect.width; ++j)
                ok = mask.at(i, j) == 1.0;
        if (!ok) ++failures;
    }
    const double elapsed = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "200 masks up to 24x24, %zu failures, %.1fs", failures,
                  elapsed);
    detail = buf;
    return failures == 0 && elapsed < 60.0;
}

// ---- criterion 4: cache equivalence ----

bool criterion_cache(std::string& detail) {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng(mix_seed(0xCAC4E, s));
        const std::size_t n = 32, p = 16;
        Tensor z_s({n, p}), z_t({n, p});
        for (auto& v : z_s.vec()) v = rng.normal(0.2, 1.3);
        for (auto& v : z_t.vec()) v = rng.normal(-0.1, 1.6);

        train::EmbeddingCache cache(n, p);
        for (std::size_t i = 0; i < n; ++i) cache.push(z_s.data() + i * p, bt::Domain::source);
        for (std::size_t i = 0; i < n; ++i) cache.push(z_t.data() + i * p, bt::Domain::target);

        bt::LossWeights w;
        const double cached = train::bt_loss_cached(cache, w);
        const double monolithic = bt::bt_loss_from_raw(z_s, z_t, w);
        worst = std::max(worst, std::fabs(cached - monolithic) / std::fabs(monolithic));
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "20 caches of 32+32, max rel deviation %.3e (tol 1e-6)",
                  worst);
    detail = buf;
    return worst <= 1e-6;
}

// ---- criterion 5: stop-gradient window ----

synth::Dataset small_dataset(std::uint64_t seed, std::size_t train_count, std::size_t val_count,
                             double fog_strength = 0.5, std::size_t size = 48) {
    synth::SceneSpec spec;
    spec.height = size;
    spec.width = size;
    spec.num_classes = 6;
    spec.mobile_class_ids = {4, 5};
    spec.corruption = synth::Corruption::fog_blend;
    spec.corruption_strength = fog_strength;
    spec.max_shift_px = 4;
    spec.mobile_object_count = 3;
    spec.seed = seed;
    synth::Dataset ds;
    ds.spec = spec;
    for (std::size_t i = 0; i < train_count; ++i)
        ds.train.push_back(synth::generate_pair(spec, i));
    for (std::size_t i = 0; i < val_count; ++i)
        ds.val.push_back(synth::generate_pair(spec, train_count + i));
    return ds;
}

nn::ModelSpec small_model_spec() {
    nn::ModelSpec spec;
    spec.encoder.stage_channels = {8, 8};
    spec.encoder.stage_strides = {4, 8};
    spec.projector.layer_dims = {16, 8, 4};
    spec.decoder.num_classes = 6;
    spec.decoder.hidden_channels = 8;
    return spec;
}

bool criterion_stopgrad(std::string& detail) {
    const auto ds = small_dataset(31, 6, 2);
    train::TrainConfig cfg;
    cfg.total_steps = 4;
    cfg.effective_batch = 4;
    cfg.warmup_steps = 0;  // real learning rate at step 0
    cfg.stopgrad_steps = 4;
    cfg.crop_size = {32, 32};
    cfg.seed = 11;
    cfg.threads = 2;

    cfg.alpha = 0.1;
    train::Trainer with_bt(nn::Model(small_model_spec(), 7), cfg, ds,
                           fs::temp_directory_path() / "acc_sg_a");
    cfg.alpha = 0.0;
    train::Trainer without(nn::Model(small_model_spec(), 7), cfg, ds,
                           fs::temp_directory_path() / "acc_sg_b");

    const auto batch = with_bt.sample_batch(0);
    with_bt.train_step(batch, 0);
    without.train_step(batch, 0);

    bool encoder_equal = true;
    bool projector_differs = false;
    for (const auto& [name, t] : with_bt.model().params()) {
        const Tensor& u = without.model().params().at(name);
        for (std::size_t i = 0; i < t.numel(); ++i) {
            if (name.starts_with("encoder.") && t[i] != u[i]) encoder_equal = false;
            if (name.starts_with("projector.") && t[i] != u[i]) projector_differs = true;
        }
    }
    detail = std::string("encoder bitwise ") + (encoder_equal ? "identical" : "DIFFERENT") +
             ", projector " + (projector_differs ? "updated" : "UNCHANGED");
    return encoder_equal && projector_differs;
}

// ---- criterion 6: desk-scale adaptation effect ----

bool criterion_adaptation(std::string& detail) {
    config::RunConfig base;  // desk-scale defaults
    base.scene.height = 96;
    base.scene.width = 96;
    base.scene.corruption = synth::Corruption::fog_blend;
    base.scene.corruption_strength = 0.6;
    base.scene.max_shift_px = 4;

    struct Setup {
        const char* name;
        bool use_bt, use_warp, use_crop;
        pooling::Variant pooling;
    };
    const Setup setups[] = {
        {"baseline", false, false, false, pooling::Variant::avg},
        {"plain-bt", true, false, false, pooling::Variant::avg},
        {"full", true, true, true, pooling::Variant::segconf},
    };

    double mean_iou[3] = {0, 0, 0};
    bool runs_in_budget = true;
    std::string log;
    for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        synth::SceneSpec scene = base.scene;
        scene.seed = seed;
        synth::Dataset ds;
        ds.spec = scene;
        for (std::size_t i = 0; i < 64; ++i) ds.train.push_back(synth::generate_pair(scene, i));
        for (std::size_t i = 0; i < 16; ++i)
            ds.val.push_back(synth::generate_pair(scene, 64 + i));

        for (int s = 0; s < 3; ++s) {
            const auto t0 = std::chrono::steady_clock::now();
            train::TrainConfig cfg = base.train;  // total 2000, batch 16, crop 64
            cfg.seed = seed;
            cfg.use_bt = setups[s].use_bt;
            cfg.use_warp = setups[s].use_warp;
            cfg.use_crop = setups[s].use_crop;
            cfg.pooling = setups[s].pooling;
            cfg.checkpoint_every = 0;

            config::RunConfig rc = base;
            rc.scene = scene;
            rc.train = cfg;
            const auto out =
                fs::temp_directory_path() / ("acc6_" + std::to_string(seed) + "_" + setups[s].name);
            fs::remove_all(out);
            train::Trainer trainer(nn::Model(rc.model_spec(), cfg.seed), cfg, ds, out);
            trainer.fit();

            metrics::EvalOptions options;
            options.domain = metrics::EvalDomain::target;
            const auto report = metrics::evaluate(trainer.model(), ds.val, options);
            mean_iou[s] += report.mean_iou / 3.0;
            const double elapsed = seconds_since(t0);
            runs_in_budget = runs_in_budget && elapsed < 1800.0;
            char line[160];
            std::snprintf(line, sizeof(line), "\n    seed %llu %-9s mIoU %.4f (%.0fs)",
                          static_cast<unsigned long long>(seed), setups[s].name, report.mean_iou,
                          elapsed);
            log += line;
            fs::remove_all(out);
        }
    }

    const double gain_pp = (mean_iou[2] - mean_iou[0]) * 100.0;
    const double vs_plain_pp = (mean_iou[2] - mean_iou[1]) * 100.0;
    char buf[240];
    std::snprintf(buf, sizeof(buf),
                  "baseline %.4f, plain-bt %.4f, full %.4f; full-baseline %+.2fpp (need >= 3), "
                  "full-plain %+.2fpp (need >= -1)",
                  mean_iou[0], mean_iou[1], mean_iou[2], gain_pp, vs_plain_pp);
    detail = std::string(buf) + log;
    return gain_pp >= 3.0 && vs_plain_pp >= -1.0 && runs_in_budget;
}

// ---- criterion 7: ablation harness structure ----

/// Flattens a JSON document to dotted paths for the switch-only diff.
void flatten(const nlohmann::json& j, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out) {
    if (j.is_object()) {
        for (const auto& [key, value] : j.items())
            flatten(value, prefix.empty() ? key : prefix + "." + key, out);
    } else {
        out.emplace_back(prefix, j.dump());
    }
}

bool criterion_ablate(std::string& detail) {
    const fs::path root = fs::temp_directory_path() / "acc7";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg_path = root / "config.json";
    nlohmann::json cfg;
    cfg["scene"] = {{"image_size", {48, 48}}, {"num_classes", 6},
                    {"corruption", "fog_blend"}, {"corruption_strength", 0.5},
                    {"max_shift_px", 3},        {"mobile_object_count", 2},
                    {"seed", 5}};
    cfg["dataset"] = {{"count", 10}, {"train_fraction", 0.8}};
    cfg["model"] = {{"stage_channels", {8, 8}},
                    {"stage_strides", {4, 8}},
                    {"decoder_hidden", 8},
                    {"projector_dims", {16, 8, 4}}};
    cfg["train"] = {{"total_steps", 20}, {"effective_batch", 4}, {"warmup_steps", 4},
                    {"stopgrad_steps", 8}, {"crop_size", {32, 32}}, {"checkpoint_every", 0},
                    {"seed", 5},           {"threads", 2}};
    cfg["out"] = root.string();
    io::write_text_file(cfg_path, cfg.dump(2));

    if (run_cli("generate --config " + cfg_path.string()) != 0) {
        detail = "generate failed";
        return false;
    }
    if (run_cli("ablate --config " + cfg_path.string()) != 0) {
        detail = "ablate failed";
        return false;
    }

    const auto report =
        nlohmann::json::parse(io::read_text_file(root / "ablate" / "ablate_report.json"));
    const auto& rows = report.at("rows");
    if (rows.size() != 7) {
        detail = "expected 7 rows, got " + std::to_string(rows.size());
        return false;
    }

    const std::set<std::string> switch_keys = {"train.use_bt", "train.use_warp", "train.use_crop",
                                               "train.pooling"};
    bool ok = true;
    std::vector<std::pair<std::string, std::string>> base_flat;
    flatten(rows.at(0).at("config"), "", base_flat);
    std::set<std::string> fingerprints;
    for (const auto& row : rows) {
        // Per-class and mean IoU columns present.
        ok = ok && row.at("report").contains("per_class_iou") &&
             row.at("report").at("per_class_iou").size() == 6 &&
             row.at("report").contains("mean_iou");
        fingerprints.insert(row.at("config_fingerprint").get<std::string>());

        std::vector<std::pair<std::string, std::string>> flat;
        flatten(row.at("config"), "", flat);
        if (flat.size() != base_flat.size()) {
            ok = false;
            continue;
        }
        for (std::size_t i = 0; i < flat.size(); ++i)
            if (flat[i].second != base_flat[i].second && !switch_keys.count(flat[i].first)) {
                detail = "rows differ outside switches: " + flat[i].first;
                return false;
            }
    }
    ok = ok && fingerprints.size() == 7;  // each row fingerprints differently
    if (ok) detail = "7 rows, switch-only config diffs, per-class + mean IoU columns";
    fs::remove_all(root);
    return ok;
}

// ---- criterion 8: lambda rule ----

bool criterion_lambda(std::string& detail) {
    const bool ok = bt::default_lambda(2) == 0.5 && bt::default_lambda(256) == 1.0 / 256.0 &&
                    bt::default_lambda(8192) == 1.0 / 8192.0;
    detail = "default_lambda(p) == 1/p for p in {2, 256, 8192}";
    return ok;
}

// ---- criterion 9: determinism of generate / train / eval ----

bool criterion_determinism(std::string& detail) {
    const fs::path root = fs::temp_directory_path() / "acc9";
    fs::remove_all(root);
    fs::create_directories(root);

    auto config_for = [&](const std::string& name) {
        nlohmann::json cfg;
        cfg["scene"] = {{"image_size", {48, 48}}, {"num_classes", 6},
                        {"corruption", "fog_blend"}, {"corruption_strength", 0.5},
                        {"max_shift_px", 3},        {"mobile_object_count", 2},
                        {"seed", 77}};
        cfg["dataset"] = {{"count", 8}, {"train_fraction", 0.75}};
        cfg["model"] = {{"stage_channels", {8, 8}},
                        {"stage_strides", {4, 8}},
                        {"decoder_hidden", 8},
                        {"projector_dims", {16, 8, 4}}};
        cfg["train"] = {{"total_steps", 8},  {"effective_batch", 4}, {"warmup_steps", 2},
                        {"stopgrad_steps", 4}, {"crop_size", {32, 32}}, {"checkpoint_every", 0},
                        {"seed", 77},          {"threads", 2}};
        cfg["out"] = (root / name).string();
        const fs::path path = root / (name + ".json");
        io::write_text_file(path, cfg.dump(2));
        return path;
    };

    const auto cfg_a = config_for("run_a");
    const auto cfg_b = config_for("run_b");
    for (const auto& cfg : {cfg_a, cfg_b}) {
        if (run_cli("generate --config " + cfg.string()) != 0 ||
            run_cli("train --config " + cfg.string()) != 0 ||
            run_cli("eval --config " + cfg.string()) != 0) {
            detail = "pipeline run failed";
            return false;
        }
    }

    bool ok = true;
    std::string what;
    // Dataset bytes: every sample file plus the manifest body.
    const auto manifest_a =
        nlohmann::json::parse(io::read_text_file(root / "run_a" / "dataset" / "manifest.json"));
    for (const auto& entry : manifest_a.at("samples"))
        for (const auto& [file, sum] : entry.at("checksums").items()) {
            const fs::path rel = fs::path(entry.at("dir").get<std::string>()) / file;
            if (!files_identical(root / "run_a" / "dataset" / rel,
                                 root / "run_b" / "dataset" / rel)) {
                ok = false;
                what = "dataset " + rel.string();
            }
        }
    if (!files_identical(root / "run_a" / "dataset" / "manifest.json",
                         root / "run_b" / "dataset" / "manifest.json")) {
        ok = false;
        what = "manifest";
    }
    if (!files_identical(root / "run_a" / "train" / "checkpoint_latest.btsa",
                         root / "run_b" / "train" / "checkpoint_latest.btsa")) {
        ok = false;
        what = "checkpoint";
    }
    if (!files_identical(root / "run_a" / "train" / "metrics.jsonl",
                         root / "run_b" / "train" / "metrics.jsonl")) {
        ok = false;
        what = "metrics log";
    }
    if (!files_identical(root / "run_a" / "eval" / "eval_report.json",
                         root / "run_b" / "eval" / "eval_report.json")) {
        ok = false;
        what = "eval report";
    }
    detail = ok ? "dataset, checkpoint, metrics log, and eval report byte-identical"
                : "mismatch in " + what;
    if (ok) fs::remove_all(root);
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0, skip = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
        if (std::strcmp(argv[i], "--skip") == 0 && i + 1 < argc) skip = std::atoi(argv[++i]);
    }

    std::vector<Criterion> criteria = {
        {1, "kernel oracle suite matches scalar-loop references", criterion_kernel_oracles},
        {2, "analytic gradients match central finite differences", criterion_gradients},
        {3, "largest interior rectangle matches brute force on 200 masks", criterion_lir},
        {4, "cached BT loss equals the monolithic full-batch loss", criterion_cache},
        {5, "stop-gradient window shields the encoder bitwise", criterion_stopgrad},
        {6, "BT regularization improves adverse-domain mIoU at desk scale", criterion_adaptation},
        {7, "ablate emits the 7-row switch matrix", criterion_ablate},
        {8, "default lambda is exactly 1/p", criterion_lambda},
        {9, "generate/train/eval reproduce byte-identical outputs", criterion_determinism},
    };

    int failures = 0;
    int executed = 0;
    for (const auto& c : criteria) {
        if (only != 0 && c.id != only) continue;
        if (skip != 0 && c.id == skip) continue;
        ++executed;
        std::string detail;
        bool pass = false;
        try {
            pass = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %d: %s — %s\n", pass ? "PASS" : "FAIL", c.id,
                    c.summary.c_str(), detail.c_str());
        std::fflush(stdout);
        if (!pass) ++failures;
    }
    std::printf("%d/%d criteria passed\n", executed - failures, executed);
    return failures == 0 ? 0 : 1;
}
