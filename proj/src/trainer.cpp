#include "btseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "btseg/checkpoint.hpp"
#include "btseg/config.hpp"
#include "btseg/errors.hpp"
#include "btseg/nn.hpp"

namespace btseg::train {

namespace {

/// Static round-robin partition; each index is processed exactly once and all
/// writes go to per-index slots, so results are independent of thread count.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t workers = std::min(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (std::size_t t = 0; t < workers; ++t)
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

Tensor to_batch(const Tensor& img) {
    Tensor out({1, img.dim(0), img.dim(1), img.dim(2)});
    std::copy(img.data(), img.data() + img.numel(), out.data());
    return out;
}

Tensor squeeze_batch(const Tensor& t) {
    Tensor out({t.dim(1), t.dim(2), t.dim(3)});
    std::copy(t.data(), t.data() + t.numel(), out.data());
    return out;
}

void flip_horizontal(Tensor& t) {
    if (t.rank() == 3) {
        const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w / 2; ++j)
                    std::swap(t.at(ch, i, j), t.at(ch, i, w - 1 - j));
    } else {
        const std::size_t h = t.dim(0), w = t.dim(1);
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w / 2; ++j) std::swap(t.at(i, j), t.at(i, w - 1 - j));
    }
}

void flip_horizontal(IntTensor& t) {
    const std::size_t h = t.dim(0), w = t.dim(1);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w / 2; ++j) std::swap(t.at(i, j), t.at(i, w - 1 - j));
}

}  // namespace

MaskSource mask_source_from_string(const std::string& s) {
    if (s == "source") return MaskSource::source;
    if (s == "per_path") return MaskSource::per_path;
    throw ConfigError("unknown mask_source: " + s);
}

std::string to_string(MaskSource m) {
    return m == MaskSource::source ? "source" : "per_path";
}

pooling::Variant pooling_from_string(const std::string& s) {
    if (s == "avg") return pooling::Variant::avg;
    if (s == "segm") return pooling::Variant::segm;
    if (s == "conf") return pooling::Variant::conf;
    if (s == "segconf") return pooling::Variant::segconf;
    throw ConfigError("unknown pooling variant: " + s);
}

std::string to_string(pooling::Variant v) {
    switch (v) {
        case pooling::Variant::avg: return "avg";
        case pooling::Variant::segm: return "segm";
        case pooling::Variant::conf: return "conf";
        case pooling::Variant::segconf: return "segconf";
    }
    return "?";
}

void TrainConfig::validate() const {
    check(warmup_steps <= total_steps, "TrainConfig: warmup_steps must not exceed total_steps");
    check(effective_batch >= 2, "TrainConfig: effective_batch must be >= 2");
    check(lr_encoder > 0.0 && lr_decoder > 0.0 && lr_projector > 0.0,
          "TrainConfig: learning rates must be positive");
    check(alpha >= 0.0, "TrainConfig: alpha must be nonnegative");
    check(weight_decay >= 0.0, "TrainConfig: weight_decay must be nonnegative");
    check(flip_prob >= 0.0 && flip_prob <= 1.0, "TrainConfig: flip_prob must be in [0,1]");
    check(crop_size.first >= 1 && crop_size.second >= 1, "TrainConfig: empty crop");
    check(bt_epsilon > 0.0 && pool_epsilon > 0.0, "TrainConfig: epsilons must be positive");
    check(min_valid_fraction >= 0.0 && min_valid_fraction <= 1.0,
          "TrainConfig: min_valid_fraction must be in [0,1]");
    check(lambda_bt >= 0.0, "TrainConfig: lambda_bt must be nonnegative");
}

double lr_schedule(std::size_t step, double base_lr, std::size_t warmup_steps,
                   std::size_t total_steps) {
    check(base_lr > 0.0, "lr_schedule: base_lr must be positive");
    check(warmup_steps <= total_steps, "lr_schedule: warmup exceeds total");
    check(step <= total_steps, "lr_schedule: step out of range");
    if (warmup_steps > 0 && step <= warmup_steps)
        return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
    if (total_steps == warmup_steps) return base_lr;
    return base_lr * static_cast<double>(total_steps - step) /
           static_cast<double>(total_steps - warmup_steps);
}

geometry::AlignedPair paired_augment(const geometry::AlignedPair& sample, Rng& rng,
                                     std::pair<std::size_t, std::size_t> crop_size,
                                     double flip_prob) {
    const std::size_t h = sample.source.dim(1), w = sample.source.dim(2);
    const auto [ch, cw] = crop_size;
    check(ch <= h && cw <= w, "paired_augment: crop larger than image");

    const bool flip = rng.bernoulli(flip_prob);
    const std::size_t top = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(h - ch)));
    const std::size_t left = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(w - cw)));
    const geometry::Rect rect{top, left, ch, cw};

    geometry::AlignedPair out{
        geometry::crop_image(sample.source, rect), geometry::crop_image(sample.target, rect),
        SegmentationMap{geometry::crop_labels(sample.labels.labels, rect),
                        sample.labels.num_classes},
        geometry::crop_plane(sample.confidence, rect)};
    if (flip) {
        flip_horizontal(out.source);
        flip_horizontal(out.target);
        flip_horizontal(out.labels.labels);
        flip_horizontal(out.confidence);
    }
    return out;
}

EmbeddingCache::EmbeddingCache(std::size_t capacity_per_domain, std::size_t dim)
    : capacity_(capacity_per_domain), dim_(dim) {
    check(capacity_ >= 2, "EmbeddingCache: capacity must be >= 2");
    check(dim_ >= 1, "EmbeddingCache: embedding dim must be >= 1");
    source_.reserve(capacity_ * dim_);
    target_.reserve(capacity_ * dim_);
}

void EmbeddingCache::push(const double* row, bt::Domain domain) {
    auto& slot = domain == bt::Domain::source ? source_ : target_;
    check(slot.size() < capacity_ * dim_, "EmbeddingCache: domain slot already full");
    slot.insert(slot.end(), row, row + dim_);
}

void EmbeddingCache::push(const Tensor& rows, bt::Domain domain) {
    check(rows.rank() == 2 && rows.dim(1) == dim_, "EmbeddingCache: row shape mismatch");
    for (std::size_t i = 0; i < rows.dim(0); ++i) push(rows.data() + i * dim_, domain);
}

void EmbeddingCache::clear() {
    source_.clear();
    target_.clear();
}

bool EmbeddingCache::full() const {
    return source_.size() == capacity_ * dim_ && target_.size() == capacity_ * dim_;
}

std::size_t EmbeddingCache::size(bt::Domain domain) const {
    return (domain == bt::Domain::source ? source_.size() : target_.size()) / dim_;
}

Tensor EmbeddingCache::stacked(bt::Domain domain) const {
    const auto& slot = domain == bt::Domain::source ? source_ : target_;
    return Tensor({slot.size() / dim_, dim_}, slot);
}

double bt_loss_cached(const EmbeddingCache& cache, const bt::LossWeights& weights) {
    check(cache.size(bt::Domain::source) == cache.size(bt::Domain::target),
          "bt_loss_cached: cache domains are unbalanced");
    check(cache.full(), "bt_loss_cached: cache underfilled");
    return bt::bt_loss_from_raw(cache.stacked(bt::Domain::source),
                                cache.stacked(bt::Domain::target), weights);
}

AdamW::AdamW(const TensorMap& params_template)
    : m_(params_template.zeros_like()), v_(params_template.zeros_like()) {}

void AdamW::step(TensorMap& params, const TensorMap& grads, const GroupLrs& lrs,
                 double weight_decay) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (auto& [name, p] : params) {
        double lr = lrs.encoder;
        if (name.starts_with("decoder.")) lr = lrs.decoder;
        else if (name.starts_with("projector.")) lr = lrs.projector;
        const Tensor& g = grads.at(name);
        Tensor& m = m_.at(name);
        Tensor& v = v_.at(name);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + weight_decay * p[i]);
        }
    }
}

Trainer::Trainer(nn::Model model, TrainConfig config, const synth::Dataset& dataset,
                 std::filesystem::path out_dir, std::string config_fingerprint)
    : model_(std::move(model)),
      config_(std::move(config)),
      dataset_(&dataset),
      out_dir_(std::move(out_dir)),
      fingerprint_(std::move(config_fingerprint)),
      optimizer_(model_.params()) {
    config_.validate();
    const std::size_t stride = model_.spec().encoder.stage_strides.back();
    check(config_.crop_size.first % stride == 0 && config_.crop_size.second % stride == 0,
          "Trainer: crop size must be divisible by the encoder stride");

    const std::size_t hw = std::thread::hardware_concurrency();
    threads_ = config_.threads > 0 ? config_.threads : std::min<std::size_t>(hw ? hw : 1, 8);

    for (const auto& sample : dataset_->train) {
        geometry::AlignedPair pair;
        if (config_.use_warp) {
            auto warped = geometry::apply_warp(sample.target, sample.warp);
            if (!geometry::filter_pair(warped.mask, config_.min_valid_fraction,
                                       config_.min_rect_side))
                continue;
            if (config_.use_crop) {
                const auto rect = geometry::largest_interior_rectangle(warped.mask);
                pair = geometry::crop_triple(sample.source, warped.image, sample.source_labels,
                                             sample.confidence, rect);
            } else {
                pair = geometry::AlignedPair{sample.source, warped.image, sample.source_labels,
                                             sample.confidence};
            }
        } else {
            pair = geometry::AlignedPair{sample.source, sample.target, sample.source_labels,
                                         sample.confidence};
        }
        check(pair.source.dim(1) >= config_.crop_size.first &&
                  pair.source.dim(2) >= config_.crop_size.second,
              "Trainer: aligned pair smaller than the training crop");
        prepared_.push_back(std::move(pair));
    }
    check(!prepared_.empty(), "Trainer: no usable training pairs after filtering");
}

std::vector<std::size_t> Trainer::sample_batch(std::size_t step) const {
    Rng rng(mix_seed(config_.seed ^ 0xBA7C4ULL, step));
    const std::size_t n = config_.effective_batch;
    std::vector<std::size_t> batch(n);
    if (prepared_.size() >= n) {
        std::vector<std::size_t> all(prepared_.size());
        std::iota(all.begin(), all.end(), 0);
        for (std::size_t k = 0; k < n; ++k) {
            const auto j = static_cast<std::size_t>(
                rng.uniform_int(static_cast<std::int64_t>(k),
                                static_cast<std::int64_t>(all.size()) - 1));
            std::swap(all[k], all[j]);
            batch[k] = all[k];
        }
    } else {
        for (std::size_t k = 0; k < n; ++k)
            batch[k] = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(prepared_.size()) - 1));
    }
    return batch;
}

StepLosses Trainer::train_step(const std::vector<std::size_t>& batch_indices, std::size_t step) {
    const std::size_t n = batch_indices.size();
    check(n >= 1, "train_step: empty batch");
    for (auto i : batch_indices) check(i < prepared_.size(), "train_step: batch index out of range");

    const bool bt_active = config_.use_bt;
    const bool bt_grad = bt_active && config_.alpha > 0.0;
    const bool stopgrad = step < config_.stopgrad_steps;
    // Early segmentation predictions are noise; guided pooling warm-starts
    // together with the end of the stop-gradient window.
    const bool segm_ready = step >= config_.stopgrad_steps;

    pooling::Variant variant = config_.pooling;
    if (!segm_ready) {
        if (variant == pooling::Variant::segm) variant = pooling::Variant::avg;
        if (variant == pooling::Variant::segconf) variant = pooling::Variant::conf;
    }

    struct ImageWork {
        geometry::AlignedPair pair;
        nn::EncoderActs enc_src, enc_tgt;
        Tensor g_fused_ce;
        Tensor pooled_src, pooled_tgt;      // (1, d)
        Tensor weights_src, weights_tgt;    // (1, m, n); empty means plain average
        std::vector<std::size_t> fshape;    // (1, d, m, n)
        double l_ce = 0.0;
        TensorMap grads;
    };
    std::vector<ImageWork> work(n);

    const auto& mobile_ids = dataset_->spec.mobile_class_ids;
    const int num_classes = dataset_->spec.num_classes;
    const double inv_n = 1.0 / static_cast<double>(n);

    parallel_for(n, threads_, [&](std::size_t i) {
        auto& wk = work[i];
        wk.grads = model_.make_grads();
        Rng rng(mix_seed(mix_seed(config_.seed, step), i));
        wk.pair =
            paired_augment(prepared_[batch_indices[i]], rng, config_.crop_size, config_.flip_prob);

        const Tensor src = to_batch(wk.pair.source);
        const Tensor fused_src = model_.encode(src, &wk.enc_src);
        wk.fshape = fused_src.shape();
        const std::size_t m = fused_src.dim(2), nn_ = fused_src.dim(3);

        nn::DecoderActs dec_acts;
        const Tensor logits = model_.decode(fused_src, &dec_acts);
        const Tensor logits3 = squeeze_batch(logits);
        auto ce = nn::softmax_cross_entropy(logits3, wk.pair.labels.labels,
                                            SegmentationMap::kIgnoreIndex, true);
        wk.l_ce = ce.loss;

        Tensor g_logits({1, logits.dim(1), logits.dim(2), logits.dim(3)});
        for (std::size_t k = 0; k < ce.g_logits.numel(); ++k)
            g_logits[k] = ce.g_logits[k] * inv_n;
        model_.decode_backward(g_logits, dec_acts, wk.grads, &wk.g_fused_ce);

        if (!bt_active) return;

        const Tensor tgt = to_batch(wk.pair.target);
        const Tensor fused_tgt = model_.encode(tgt, &wk.enc_tgt);

        // Pooling weights per the configured variant; the moving-object mask
        // comes from the current source prediction (or per-path predictions).
        Tensor mask_src, mask_tgt, conf;
        if (variant == pooling::Variant::segm || variant == pooling::Variant::segconf) {
            IntTensor pred = nn::argmax_channel(logits3);
            IntTensor pred3({1, pred.dim(0), pred.dim(1)}, pred.vec());
            mask_src = pooling::mask_from_segmentation(SegmentationMap{pred3, num_classes},
                                                       mobile_ids, {m, nn_});
            if (config_.mask_source == MaskSource::per_path) {
                const Tensor tgt_logits = model_.decode(fused_tgt);
                Tensor tl3 = squeeze_batch(tgt_logits);
                IntTensor tpred = nn::argmax_channel(tl3);
                IntTensor tpred3({1, tpred.dim(0), tpred.dim(1)}, tpred.vec());
                mask_tgt = pooling::mask_from_segmentation(SegmentationMap{tpred3, num_classes},
                                                           mobile_ids, {m, nn_});
            } else {
                mask_tgt = mask_src;
            }
        }
        if (variant == pooling::Variant::conf || variant == pooling::Variant::segconf) {
            Tensor conf3({1, wk.pair.confidence.dim(0), wk.pair.confidence.dim(1)},
                         wk.pair.confidence.vec());
            conf = pooling::downsample_block_mean(conf3, {m, nn_});
        }

        auto combine = [&](const Tensor& mask) {
            switch (variant) {
                case pooling::Variant::avg: return Tensor();
                case pooling::Variant::segm: return mask;
                case pooling::Variant::conf: return conf;
                case pooling::Variant::segconf: {
                    Tensor w(mask.shape());
                    for (std::size_t k = 0; k < w.numel(); ++k) w[k] = mask[k] * conf[k];
                    return w;
                }
            }
            return Tensor();
        };
        wk.weights_src = combine(mask_src);
        wk.weights_tgt = combine(mask_tgt);

        auto pool = [&](const Tensor& fused, const Tensor& weights) {
            if (weights.empty()) return pooling::average_pool(fused);
            Tensor out({1, fused.dim(1)});
            const std::size_t d = fused.dim(1);
            double denom = config_.pool_epsilon;
            for (std::size_t k = 0; k < weights.numel(); ++k) denom += weights[k];
            for (std::size_t c = 0; c < d; ++c) {
                double num = 0.0;
                for (std::size_t y = 0; y < m; ++y)
                    for (std::size_t x = 0; x < nn_; ++x)
                        num += fused.at(0, c, y, x) * weights.at(0, y, x);
                out.at(0, c) = num / denom;
            }
            return out;
        };
        wk.pooled_src = pool(fused_src, wk.weights_src);
        wk.pooled_tgt = pool(fused_tgt, wk.weights_tgt);
    });

    StepLosses losses;
    for (const auto& wk : work) losses.l_ce += wk.l_ce * inv_n;

    TensorMap grads = model_.make_grads();
    Tensor g_pooled;

    if (bt_active) {
        const std::size_t d = model_.spec().encoder.fused_dim();
        const std::size_t p = model_.spec().projector.embedding_dim();
        Tensor pooled_all({2 * n, d});
        for (std::size_t i = 0; i < n; ++i) {
            std::copy(work[i].pooled_src.data(), work[i].pooled_src.data() + d,
                      pooled_all.data() + i * d);
            std::copy(work[i].pooled_tgt.data(), work[i].pooled_tgt.data() + d,
                      pooled_all.data() + (n + i) * d);
        }
        nn::ProjectorActs pacts;
        const Tensor emb = model_.project(pooled_all, true, true, &pacts);

        EmbeddingCache cache(n, p);
        for (std::size_t i = 0; i < n; ++i) cache.push(emb.data() + i * p, bt::Domain::source);
        for (std::size_t i = 0; i < n; ++i)
            cache.push(emb.data() + (n + i) * p, bt::Domain::target);

        bt::LossWeights weights;
        weights.lambda_bt = config_.lambda_bt;
        weights.alpha = config_.alpha;
        weights.epsilon = config_.bt_epsilon;
        losses.l_bt = bt_loss_cached(cache, weights);

        if (bt_grad) {
            // Embedding-cache gradient convention: batch statistics are
            // constants, each row receives only its own-row gradient.
            const auto g = bt::bt_loss_backward_stats_const(
                cache.stacked(bt::Domain::source), cache.stacked(bt::Domain::target), weights);
            Tensor g_emb({2 * n, p});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < p; ++j) {
                    g_emb.at(i, j) = config_.alpha * g.d_z_a.at(i, j);
                    g_emb.at(n + i, j) = config_.alpha * g.d_z_b.at(i, j);
                }
            Tensor g_pooled_local;
            model_.project_backward(g_emb, pacts, grads,
                                    stopgrad ? nullptr : &g_pooled_local);
            if (!stopgrad) g_pooled = std::move(g_pooled_local);
        }
    }

    parallel_for(n, threads_, [&](std::size_t i) {
        auto& wk = work[i];
        const std::size_t d = wk.fshape[1];
        Tensor g_feat = wk.g_fused_ce;
        if (!g_pooled.empty()) {
            Tensor g_row({1, d});
            std::copy(g_pooled.data() + i * d, g_pooled.data() + (i + 1) * d, g_row.data());
            const Tensor g_bt =
                pooling::pool_backward(g_row, wk.weights_src, wk.fshape, config_.pool_epsilon);
            for (std::size_t k = 0; k < g_feat.numel(); ++k) g_feat[k] += g_bt[k];
        }
        model_.encode_backward(g_feat, wk.enc_src, wk.grads);

        if (!g_pooled.empty()) {
            Tensor g_row({1, d});
            std::copy(g_pooled.data() + (n + i) * d, g_pooled.data() + (n + i + 1) * d,
                      g_row.data());
            const Tensor g_bt =
                pooling::pool_backward(g_row, wk.weights_tgt, wk.fshape, config_.pool_epsilon);
            model_.encode_backward(g_bt, wk.enc_tgt, wk.grads);
        }
    });

    for (const auto& wk : work) grads.accumulate(wk.grads);

    losses.l_total = losses.l_ce + (bt_active ? config_.alpha * losses.l_bt : 0.0);
    if (!std::isfinite(losses.l_total)) {
        nlohmann::json dump;
        dump["step"] = step;
        dump["l_ce"] = losses.l_ce;
        dump["l_bt"] = losses.l_bt;
        nlohmann::json norms;
        for (const auto& [name, t] : model_.params()) {
            double s = 0.0;
            for (double v : t.vec()) s += v * v;
            norms[name] = std::sqrt(s);
        }
        dump["param_norms"] = norms;
        std::error_code ec;
        std::filesystem::create_directories(out_dir_, ec);
        const auto dump_path = out_dir_ / "nan_dump.json";
        std::ofstream(dump_path) << dump.dump(2) << "\n";
        throw NanAbort("train_step: non-finite loss at step " + std::to_string(step),
                       dump_path.string());
    }

    AdamW::GroupLrs lrs;
    lrs.encoder = lr_schedule(step, config_.lr_encoder, config_.warmup_steps, config_.total_steps);
    lrs.decoder = lr_schedule(step, config_.lr_decoder, config_.warmup_steps, config_.total_steps);
    lrs.projector =
        lr_schedule(step, config_.lr_projector, config_.warmup_steps, config_.total_steps);
    losses.lr_encoder = lrs.encoder;
    losses.lr_decoder = lrs.decoder;
    losses.lr_projector = lrs.projector;

    optimizer_.step(model_.params(), grads, lrs, config_.weight_decay);
    return losses;
}

void Trainer::save_checkpoint(const std::filesystem::path& path, std::size_t next_step) const {
    Archive ar;
    ar.meta["format"] = 1;
    ar.meta["step"] = next_step;
    ar.meta["opt_t"] = optimizer_.t();
    ar.meta["config_fingerprint"] = fingerprint_;
    ar.meta["model_spec"] = config::model_spec_to_json(model_.spec());
    for (const auto& [name, t] : model_.params()) ar.add("model/" + name, t);
    for (const auto& [name, t] : model_.buffers()) ar.add("buffers/" + name, t);
    for (const auto& [name, t] : const_cast<AdamW&>(optimizer_).m()) ar.add("opt_m/" + name, t);
    for (const auto& [name, t] : const_cast<AdamW&>(optimizer_).v()) ar.add("opt_v/" + name, t);
    ar.save(path);
}

std::size_t Trainer::load_checkpoint(const std::filesystem::path& path) {
    const Archive ar = Archive::load(path);
    auto restore = [&](TensorMap& map, const std::string& prefix) {
        for (auto& [name, t] : map) {
            const Tensor& src = ar.get(prefix + name);
            check(src.same_shape(t), "load_checkpoint: shape mismatch for " + name);
            t = src;
        }
    };
    restore(model_.params(), "model/");
    restore(model_.buffers(), "buffers/");
    restore(optimizer_.m(), "opt_m/");
    restore(optimizer_.v(), "opt_v/");
    optimizer_.set_t(ar.meta.at("opt_t").get<std::size_t>());
    return ar.meta.at("step").get<std::size_t>();
}

FitResult Trainer::fit(bool resume) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir_, ec);
    if (ec) throw IoError("fit: cannot create output directory " + out_dir_.string());

    const auto latest = out_dir_ / "checkpoint_latest.btsa";
    std::size_t start = 0;
    if (resume) {
        if (!std::filesystem::exists(latest))
            throw IoError("fit: no checkpoint to resume from at " + latest.string());
        start = load_checkpoint(latest);
    }

    FitResult result;
    result.metrics_log = out_dir_ / "metrics.jsonl";
    result.trained_pairs = prepared_.size();
    std::ofstream log(result.metrics_log,
                      resume ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("fit: cannot open metrics log " + result.metrics_log.string());
    if (!resume) {
        nlohmann::json header;
        header["format"] = 1;
        header["config_fingerprint"] = fingerprint_;
        log << header.dump() << "\n";
    }

    for (std::size_t step = start; step < config_.total_steps; ++step) {
        const auto batch = sample_batch(step);
        const StepLosses l = train_step(batch, step);
        result.losses.push_back(l);

        nlohmann::json rec;
        rec["step"] = step;
        rec["l_ce"] = l.l_ce;
        rec["l_bt"] = l.l_bt;
        rec["lr_enc"] = l.lr_encoder;
        rec["lr_dec"] = l.lr_decoder;
        rec["lr_proj"] = l.lr_projector;
        log << rec.dump() << "\n";

        if (config_.checkpoint_every > 0 && (step + 1) % config_.checkpoint_every == 0 &&
            step + 1 < config_.total_steps) {
            char name[48];
            std::snprintf(name, sizeof(name), "checkpoint_%06zu.btsa", step + 1);
            save_checkpoint(out_dir_ / name, step + 1);
            save_checkpoint(latest, step + 1);
        }
    }
    log.flush();

    save_checkpoint(latest, config_.total_steps);
    result.checkpoint = latest;
    return result;
}

nn::Model model_from_checkpoint(const std::filesystem::path& path) {
    const Archive ar = Archive::load(path);
    nn::Model model(config::model_spec_from_json(ar.meta.at("model_spec")), 0);
    for (auto& [name, t] : model.params()) {
        const Tensor& src = ar.get("model/" + name);
        check(src.same_shape(t), "model_from_checkpoint: shape mismatch for " + name);
        t = src;
    }
    for (auto& [name, t] : model.buffers()) {
        const Tensor& src = ar.get("buffers/" + name);
        check(src.same_shape(t), "model_from_checkpoint: shape mismatch for " + name);
        t = src;
    }
    return model;
}

}  // namespace btseg::train
