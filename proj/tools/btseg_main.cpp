#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "btseg/config.hpp"
#include "btseg/errors.hpp"
#include "btseg/io.hpp"
#include "btseg/metrics.hpp"
#include "btseg/model.hpp"
#include "btseg/selfcheck.hpp"
#include "btseg/synthdata.hpp"
#include "btseg/trainer.hpp"

namespace {

namespace fs = std::filesystem;
using namespace btseg;

constexpr int kOk = 0;
constexpr int kCheckFailure = 1;
constexpr int kConfigError = 2;
constexpr int kIoError = 3;
constexpr int kNumericAbort = 4;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string data_dir;
    std::optional<std::uint64_t> seed;
};

config::RunConfig load_config(const CommonArgs& args) {
    config::RunConfig cfg = config::RunConfig::load(args.config_path);
    // Flag > file > default.
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (args.seed) {
        cfg.scene.seed = *args.seed;
        cfg.train.seed = *args.seed;
    }
    return cfg;
}

fs::path dataset_dir(const config::RunConfig& cfg, const CommonArgs& args) {
    if (!args.data_dir.empty()) return args.data_dir;
    return fs::path(cfg.out_dir) / "dataset";
}

int cmd_generate(const CommonArgs& args) {
    const config::RunConfig cfg = load_config(args);
    const fs::path root =
        args.out_dir.empty() ? fs::path(cfg.out_dir) / "dataset" : fs::path(args.out_dir);
    const auto manifest = synth::write_dataset(cfg.scene, cfg.dataset.count,
                                               cfg.dataset.train_fraction, root);
    std::uint64_t combined = 0xcbf29ce484222325ULL;
    for (const auto& e : manifest.entries)
        for (const auto& [file, sum] : e.checksums)
            combined = io::fnv1a64(sum) ^ (combined * 0x100000001b3ULL);
    std::printf("wrote %zu samples to %s (manifest fingerprint %s, content %016llx)\n",
                manifest.entries.size(), root.string().c_str(), manifest.fingerprint.c_str(),
                static_cast<unsigned long long>(combined));
    return kOk;
}

int cmd_train(const CommonArgs& args, bool resume) {
    const config::RunConfig cfg = load_config(args);
    const fs::path data = dataset_dir(cfg, args);
    if (!fs::exists(data / "manifest.json"))
        throw IoError("dataset not found at " + data.string() + " (run `generate` first)");
    const synth::Dataset dataset = synth::load_dataset(data);

    const fs::path out = fs::path(cfg.out_dir) / "train";
    nn::Model model(cfg.model_spec(), cfg.train.seed);
    train::Trainer trainer(std::move(model), cfg.train, dataset, out, cfg.fingerprint());
    const auto result = trainer.fit(resume);
    std::error_code ec;
    fs::create_directories(out, ec);
    io::write_text_file(out / "run_config.json", cfg.to_json().dump(2) + "\n");
    std::printf("trained %zu steps on %zu pairs; checkpoint %s\n", cfg.train.total_steps,
                result.trained_pairs, result.checkpoint.string().c_str());
    return kOk;
}

int cmd_eval(const CommonArgs& args, std::string checkpoint_path) {
    const config::RunConfig cfg = load_config(args);
    const fs::path data = dataset_dir(cfg, args);
    if (!fs::exists(data / "manifest.json")) throw IoError("dataset not found at " + data.string());
    const synth::Dataset dataset = synth::load_dataset(data);

    if (checkpoint_path.empty())
        checkpoint_path = (fs::path(cfg.out_dir) / "train" / "checkpoint_latest.btsa").string();
    if (!fs::exists(checkpoint_path)) throw IoError("checkpoint not found: " + checkpoint_path);
    const nn::Model model = train::model_from_checkpoint(checkpoint_path);

    metrics::EvalOptions options;
    options.domain = cfg.eval.domain == "source" ? metrics::EvalDomain::source
                                                 : metrics::EvalDomain::target;
    options.config_fingerprint = cfg.fingerprint();
    const auto& split = cfg.eval.split == "train" ? dataset.train : dataset.val;
    const auto report = metrics::evaluate(model, split, options);

    const fs::path out = fs::path(cfg.out_dir) / "eval";
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out.string());
    io::write_text_file(out / "eval_report.json", report.to_json().dump(2) + "\n");

    std::string header(24, ' ');
    char col[24];
    std::snprintf(col, sizeof(col), " %6s", "mean");
    header += col;
    for (std::size_t c = 0; c < report.per_class_iou.size(); ++c) {
        std::snprintf(col, sizeof(col), " cls%02zu", c);
        header += col;
    }
    std::printf("%s\n%s\n", header.c_str(),
                report.to_table(cfg.eval.split + "/" + cfg.eval.domain).c_str());
    return kOk;
}

int cmd_ablate(const CommonArgs& args) {
    const config::RunConfig base = load_config(args);
    const fs::path data = dataset_dir(base, args);
    if (!fs::exists(data / "manifest.json")) throw IoError("dataset not found at " + data.string());
    const synth::Dataset dataset = synth::load_dataset(data);
    const fs::path out = fs::path(base.out_dir) / "ablate";

    struct Row {
        const char* name;
        bool use_bt, use_warp, use_crop;
        pooling::Variant pooling;
    };
    const Row rows[] = {
        {"baseline", false, false, false, pooling::Variant::avg},
        {"bt", true, false, false, pooling::Variant::avg},
        {"bt+warp", true, true, false, pooling::Variant::avg},
        {"bt+warp+crop", true, true, true, pooling::Variant::avg},
        {"bt+warp+crop segm", true, true, true, pooling::Variant::segm},
        {"bt+warp+crop conf", true, true, true, pooling::Variant::conf},
        {"bt+warp+crop segconf", true, true, true, pooling::Variant::segconf},
    };

    nlohmann::json report_rows = nlohmann::json::array();
    std::vector<std::string> table_lines;
    std::size_t num_classes = 0;
    for (const auto& row : rows) {
        config::RunConfig cfg = base;
        cfg.train.use_bt = row.use_bt;
        cfg.train.use_warp = row.use_warp;
        cfg.train.use_crop = row.use_crop;
        cfg.train.pooling = row.pooling;

        const fs::path row_out = out / row.name;
        nn::Model model(cfg.model_spec(), cfg.train.seed);
        train::Trainer trainer(std::move(model), cfg.train, dataset, row_out, cfg.fingerprint());
        trainer.fit(false);

        metrics::EvalOptions options;
        options.domain = metrics::EvalDomain::target;
        options.config_fingerprint = cfg.fingerprint();
        const auto report = metrics::evaluate(trainer.model(), dataset.val, options);
        num_classes = report.per_class_iou.size();

        nlohmann::json jr;
        jr["name"] = row.name;
        jr["switches"] = {{"use_bt", row.use_bt},
                          {"use_warp", row.use_warp},
                          {"use_crop", row.use_crop},
                          {"pooling", train::to_string(row.pooling)}};
        jr["config"] = cfg.to_json();
        jr["config_fingerprint"] = cfg.fingerprint();
        jr["report"] = report.to_json();
        report_rows.push_back(jr);
        table_lines.push_back(report.to_table(row.name));
    }

    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create " + out.string());
    nlohmann::json full;
    full["rows"] = report_rows;
    full["base_config_fingerprint"] = base.fingerprint();
    io::write_text_file(out / "ablate_report.json", full.dump(2) + "\n");

    std::string header(24, ' ');
    char col[24];
    std::snprintf(col, sizeof(col), " %6s", "mean");
    header += col;
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::snprintf(col, sizeof(col), " cls%02zu", c);
        header += col;
    }
    std::printf("%s\n", header.c_str());
    for (const auto& line : table_lines) std::printf("%s\n", line.c_str());
    std::printf("report written to %s\n", (out / "ablate_report.json").string().c_str());
    return kOk;
}

int cmd_check(const std::string& scope) {
    std::vector<selfcheck::CheckResult> results;
    if (scope == "grads" || scope == "all") {
        const auto r = selfcheck::run_gradient_checks();
        results.insert(results.end(), r.begin(), r.end());
    }
    if (scope == "oracles" || scope == "all") {
        const auto r = selfcheck::run_oracle_checks();
        results.insert(results.end(), r.begin(), r.end());
    }
    std::fputs(selfcheck::format_results(results).c_str(), stdout);
    return selfcheck::all_pass(results) ? kOk : kCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"btseg: Barlow-Twins-regularized segmentation trainer"};
    app.require_subcommand(1);

    CommonArgs args;
    bool resume = false;
    std::string checkpoint_path;
    std::string scope = "all";

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        auto* opt = cmd->add_option("--config", args.config_path, "run configuration file (JSON)");
        if (needs_config) opt->required();
        cmd->add_option("--out", args.out_dir, "output directory override");
        cmd->add_option("--seed", args.seed, "seed override (scene and training)");
        cmd->add_option("--data", args.data_dir, "dataset directory");
    };

    auto* generate = app.add_subcommand("generate", "write a synthetic paired dataset");
    add_common(generate, true);
    auto* train_cmd = app.add_subcommand("train", "train with the configured switches");
    add_common(train_cmd, true);
    train_cmd->add_flag("--resume", resume, "continue from the latest checkpoint");
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd, true);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate");
    auto* ablate = app.add_subcommand("ablate", "run the 7-row switch matrix");
    add_common(ablate, true);
    auto* check = app.add_subcommand("check", "numerical self-checks");
    check->add_option("--scope", scope, "grads | oracles | all")
        ->check(CLI::IsMember({"grads", "oracles", "all"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (generate->parsed()) return cmd_generate(args);
        if (train_cmd->parsed()) return cmd_train(args, resume);
        if (eval_cmd->parsed()) return cmd_eval(args, checkpoint_path);
        if (ablate->parsed()) return cmd_ablate(args);
        if (check->parsed()) return cmd_check(scope);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const NanAbort& e) {
        std::fprintf(stderr, "numeric abort: %s (diagnostic dump: %s)\n", e.what(),
                     e.dump_path.c_str());
        return kNumericAbort;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kIoError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kConfigError;
    }
    return kOk;
}
