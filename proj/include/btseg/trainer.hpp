#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "btseg/bt_core.hpp"
#include "btseg/geometry.hpp"
#include "btseg/model.hpp"
#include "btseg/pooling.hpp"
#include "btseg/rng.hpp"
#include "btseg/synthdata.hpp"
#include "btseg/tensor_map.hpp"

namespace btseg::train {

enum class MaskSource { source, per_path };

MaskSource mask_source_from_string(const std::string& s);
std::string to_string(MaskSource m);
pooling::Variant pooling_from_string(const std::string& s);
std::string to_string(pooling::Variant v);

struct TrainConfig {
    std::size_t total_steps = 2000;
    std::size_t effective_batch = 16;
    double alpha = 0.1;
    std::size_t warmup_steps = 300;
    std::size_t stopgrad_steps = 500;
    double lr_encoder = 1.6e-4;
    double lr_decoder = 1.6e-5;
    double lr_projector = 1.6e-3;
    double weight_decay = 0.01;
    std::pair<std::size_t, std::size_t> crop_size{64, 64};
    double flip_prob = 0.5;
    bool use_bt = true;
    bool use_warp = true;
    bool use_crop = true;
    pooling::Variant pooling = pooling::Variant::segconf;
    MaskSource mask_source = MaskSource::source;
    double lambda_bt = 0.0;  // 0 -> 1/p
    double bt_epsilon = 1e-5;
    double pool_epsilon = 1e-6;
    double min_valid_fraction = 0.3;
    std::size_t min_rect_side = 32;
    std::uint64_t seed = 1;
    std::size_t checkpoint_every = 500;
    std::size_t threads = 0;  // 0 = hardware concurrency (capped)

    void validate() const;
};

/// Linear ramp 0 -> base over [0, warmup], then linear decay base -> 0 over
/// [warmup, total]. warmup == 0 starts directly on the decay leg.
double lr_schedule(std::size_t step, double base_lr, std::size_t warmup_steps,
                   std::size_t total_steps);

/// One flip decision and one crop window, applied identically to source,
/// target, labels, and confidence.
geometry::AlignedPair paired_augment(const geometry::AlignedPair& sample, Rng& rng,
                                     std::pair<std::size_t, std::size_t> crop_size,
                                     double flip_prob);

/// Per-image embeddings collected over one accumulation window, one slot list
/// per domain; the BT loss is evaluated once both sides are full.
class EmbeddingCache {
public:
    EmbeddingCache(std::size_t capacity_per_domain, std::size_t dim);

    void push(const double* row, bt::Domain domain);
    void push(const Tensor& rows, bt::Domain domain);  // (k, p) appended row-wise
    void clear();
    bool full() const;
    std::size_t size(bt::Domain domain) const;
    std::size_t capacity() const { return capacity_; }
    std::size_t dim() const { return dim_; }
    Tensor stacked(bt::Domain domain) const;  // (capacity, p)

private:
    std::size_t capacity_, dim_;
    std::vector<double> source_, target_;
};

/// Numerically equal to the monolithic full-batch loss on the stacked rows.
double bt_loss_cached(const EmbeddingCache& cache, const bt::LossWeights& weights);

/// Decoupled-weight-decay Adam, beta = (0.9, 0.999), eps = 1e-8, with one
/// learning rate per component resolved from the parameter name prefix.
class AdamW {
public:
    explicit AdamW(const TensorMap& params_template);

    struct GroupLrs {
        double encoder = 0.0, decoder = 0.0, projector = 0.0;
    };

    void step(TensorMap& params, const TensorMap& grads, const GroupLrs& lrs,
              double weight_decay);

    std::size_t t() const { return t_; }
    void set_t(std::size_t t) { t_ = t; }
    TensorMap& m() { return m_; }
    TensorMap& v() { return v_; }

private:
    TensorMap m_, v_;
    std::size_t t_ = 0;
};

struct StepLosses {
    double l_ce = 0.0;
    double l_bt = 0.0;
    double l_total = 0.0;
    double lr_encoder = 0.0, lr_decoder = 0.0, lr_projector = 0.0;
};

struct FitResult {
    std::filesystem::path checkpoint;
    std::filesystem::path metrics_log;
    std::vector<StepLosses> losses;
    std::size_t trained_pairs = 0;
};

class Trainer {
public:
    Trainer(nn::Model model, TrainConfig config, const synth::Dataset& dataset,
            std::filesystem::path out_dir, std::string config_fingerprint = {});

    /// One optimizer update over `effective_batch` pairs processed
    /// individually; CE on the source path, BT across domains per the pooling
    /// switch, stop-gradient window respected.
    StepLosses train_step(const std::vector<std::size_t>& batch_indices, std::size_t step);

    FitResult fit(bool resume = false);

    std::vector<std::size_t> sample_batch(std::size_t step) const;

    nn::Model& model() { return model_; }
    const TrainConfig& config() const { return config_; }
    std::size_t usable_pairs() const { return prepared_.size(); }
    const geometry::AlignedPair& prepared_pair(std::size_t i) const { return prepared_[i]; }

    void save_checkpoint(const std::filesystem::path& path, std::size_t next_step) const;
    /// Returns the step to continue from.
    std::size_t load_checkpoint(const std::filesystem::path& path);

    const std::filesystem::path& out_dir() const { return out_dir_; }

private:
    nn::Model model_;
    TrainConfig config_;
    const synth::Dataset* dataset_;
    std::filesystem::path out_dir_;
    std::string fingerprint_;
    std::vector<geometry::AlignedPair> prepared_;
    AdamW optimizer_;
    std::size_t threads_;
};

/// Rebuilds a model (spec + parameters + buffers) from a checkpoint archive.
nn::Model model_from_checkpoint(const std::filesystem::path& path);

}  // namespace btseg::train
