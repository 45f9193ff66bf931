#include "btseg/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "btseg/bt_core.hpp"
#include "btseg/errors.hpp"
#include "btseg/metrics.hpp"
#include "btseg/model.hpp"
#include "btseg/nn.hpp"
#include "btseg/pooling.hpp"
#include "btseg/rng.hpp"

namespace btseg::selfcheck {

namespace {

double rel_err(double a, double b) {
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-12});
    return std::fabs(a - b) / scale;
}

double max_rel_err(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "max_rel_err: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
    return worst;
}

Tensor random_matrix(Rng& rng, std::size_t b, std::size_t p, double scale = 2.0,
                     double offset = 0.0) {
    Tensor t({b, p});
    for (auto& v : t.vec()) v = offset + scale * rng.normal();
    return t;
}

Tensor random_features(Rng& rng, std::size_t b, std::size_t d, std::size_t m, std::size_t n) {
    Tensor t({b, d, m, n});
    for (auto& v : t.vec()) v = rng.normal();
    return t;
}

std::vector<double*> tensor_ptrs(Tensor& t) {
    std::vector<double*> ptrs(t.numel());
    for (std::size_t i = 0; i < t.numel(); ++i) ptrs[i] = &t[i];
    return ptrs;
}

// ---- end-to-end instance: the canonical tiny configuration ----

struct E2eInstance {
    nn::Model model;
    Tensor src, tgt;                // (4,3,16,16)
    std::vector<IntTensor> labels;  // per image (16,16)
    bt::LossWeights weights;
};

E2eInstance make_e2e(std::uint64_t seed) {
    nn::ModelSpec spec;
    spec.encoder.stage_channels = {8, 8};
    spec.encoder.stage_strides = {2, 4};
    spec.projector.layer_dims = {16, 10, 8};
    spec.decoder.num_classes = 4;
    spec.decoder.hidden_channels = 8;

    E2eInstance inst{nn::Model(spec, seed), Tensor({4, 3, 16, 16}), Tensor({4, 3, 16, 16}), {}, {}};
    Rng rng(mix_seed(seed, 0xE2E));
    for (auto& v : inst.src.vec()) v = rng.uniform(0.05, 0.95);
    for (auto& v : inst.tgt.vec()) v = rng.uniform(0.05, 0.95);
    for (std::size_t i = 0; i < 4; ++i) {
        IntTensor lab({16, 16});
        for (auto& v : lab.vec()) v = static_cast<std::int32_t>(rng.uniform_int(0, 3));
        inst.labels.push_back(std::move(lab));
    }
    inst.weights.alpha = 0.1;
    return inst;
}

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t count) {
    Tensor out({count, t.dim(1)});
    std::copy(t.data() + begin * t.dim(1), t.data() + (begin + count) * t.dim(1), out.data());
    return out;
}

double e2e_loss(E2eInstance& inst) {
    const std::size_t b = inst.src.dim(0);
    const Tensor fused_src = inst.model.encode(inst.src);
    const Tensor fused_tgt = inst.model.encode(inst.tgt);
    const Tensor logits = inst.model.decode(fused_src);

    double l_ce = 0.0;
    const std::size_t plane = logits.dim(1) * logits.dim(2) * logits.dim(3);
    for (std::size_t i = 0; i < b; ++i) {
        Tensor one({logits.dim(1), logits.dim(2), logits.dim(3)});
        std::copy(logits.data() + i * plane, logits.data() + (i + 1) * plane, one.data());
        l_ce += nn::softmax_cross_entropy(one, inst.labels[i], SegmentationMap::kIgnoreIndex, false)
                    .loss /
                static_cast<double>(b);
    }

    const Tensor pooled_src = pooling::average_pool(fused_src);
    const Tensor pooled_tgt = pooling::average_pool(fused_tgt);
    Tensor pooled_all({2 * b, pooled_src.dim(1)});
    std::copy(pooled_src.data(), pooled_src.data() + pooled_src.numel(), pooled_all.data());
    std::copy(pooled_tgt.data(), pooled_tgt.data() + pooled_tgt.numel(),
              pooled_all.data() + pooled_src.numel());
    const Tensor emb = inst.model.project(pooled_all, true, false);
    const double l_bt = bt::bt_loss_from_raw(slice_rows(emb, 0, b), slice_rows(emb, b, b),
                                             inst.weights);
    return bt::combined_loss(l_ce, l_bt, inst.weights.alpha);
}

TensorMap e2e_grads(E2eInstance& inst) {
    const std::size_t b = inst.src.dim(0);
    TensorMap grads = inst.model.make_grads();

    nn::EncoderActs ea_src, ea_tgt;
    nn::DecoderActs da;
    nn::ProjectorActs pa;
    const Tensor fused_src = inst.model.encode(inst.src, &ea_src);
    const Tensor fused_tgt = inst.model.encode(inst.tgt, &ea_tgt);
    const Tensor logits = inst.model.decode(fused_src, &da);

    Tensor g_logits(logits.shape());
    const std::size_t plane = logits.dim(1) * logits.dim(2) * logits.dim(3);
    for (std::size_t i = 0; i < b; ++i) {
        Tensor one({logits.dim(1), logits.dim(2), logits.dim(3)});
        std::copy(logits.data() + i * plane, logits.data() + (i + 1) * plane, one.data());
        const auto ce =
            nn::softmax_cross_entropy(one, inst.labels[i], SegmentationMap::kIgnoreIndex, true);
        for (std::size_t k = 0; k < plane; ++k)
            g_logits[i * plane + k] = ce.g_logits[k] / static_cast<double>(b);
    }
    Tensor g_fused_src;
    inst.model.decode_backward(g_logits, da, grads, &g_fused_src);

    const Tensor pooled_src = pooling::average_pool(fused_src);
    const Tensor pooled_tgt = pooling::average_pool(fused_tgt);
    Tensor pooled_all({2 * b, pooled_src.dim(1)});
    std::copy(pooled_src.data(), pooled_src.data() + pooled_src.numel(), pooled_all.data());
    std::copy(pooled_tgt.data(), pooled_tgt.data() + pooled_tgt.numel(),
              pooled_all.data() + pooled_src.numel());
    const Tensor emb = inst.model.project(pooled_all, true, false, &pa);

    // Exact gradient, including the batch-statistics terms.
    const auto g_bt = bt::bt_loss_backward(slice_rows(emb, 0, b), slice_rows(emb, b, b),
                                           inst.weights);
    const std::size_t p = emb.dim(1);
    Tensor g_emb({2 * b, p});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            g_emb.at(i, j) = inst.weights.alpha * g_bt.d_z_a.at(i, j);
            g_emb.at(b + i, j) = inst.weights.alpha * g_bt.d_z_b.at(i, j);
        }
    Tensor g_pooled;
    inst.model.project_backward(g_emb, pa, grads, &g_pooled);

    const auto& fshape = fused_src.shape();
    Tensor g_pooled_src = slice_rows(g_pooled, 0, b);
    Tensor g_pooled_tgt = slice_rows(g_pooled, b, b);
    const Tensor g_bt_src = pooling::pool_backward(g_pooled_src, Tensor(), fshape, 0.0);
    const Tensor g_bt_tgt = pooling::pool_backward(g_pooled_tgt, Tensor(), fshape, 0.0);
    for (std::size_t k = 0; k < g_fused_src.numel(); ++k) g_fused_src[k] += g_bt_src[k];

    inst.model.encode_backward(g_fused_src, ea_src, grads);
    inst.model.encode_backward(g_bt_tgt, ea_tgt, grads);
    return grads;
}

}  // namespace

ref::FdReport bt_gradient_check(std::uint64_t seed, std::size_t b, std::size_t p) {
    Rng rng(seed);
    Tensor z_a = random_matrix(rng, b, p, 1.5, 0.3);
    Tensor z_b = random_matrix(rng, b, p, 1.5, -0.2);
    bt::LossWeights weights;
    const auto grads = bt::bt_loss_backward(z_a, z_b, weights);

    std::vector<double*> values;
    std::vector<double> analytic;
    for (auto* v : tensor_ptrs(z_a)) values.push_back(v);
    for (double v : grads.d_z_a.vec()) analytic.push_back(v);
    for (auto* v : tensor_ptrs(z_b)) values.push_back(v);
    for (double v : grads.d_z_b.vec()) analytic.push_back(v);

    const auto loss = [&] { return bt::bt_loss_from_raw(z_a, z_b, weights); };
    return ref::fd_compare(loss, values, analytic, 1e-3);
}

ref::FdReport pool_gradient_check(std::uint64_t seed, int variant) {
    Rng rng(seed);
    const std::size_t b = 2, d = 3, m = 4, n = 5;
    Tensor y = random_features(rng, b, d, m, n);
    Tensor mask({b, m, n});
    for (auto& v : mask.vec()) v = rng.bernoulli(0.6) ? 1.0 : 0.0;
    Tensor conf({b, m, n});
    for (auto& v : conf.vec()) v = rng.uniform();
    const double eps = 1e-6;

    Tensor weights;  // combined plane; empty = plain average
    if (variant == 1) weights = mask;
    if (variant == 2) weights = conf;
    if (variant == 3) {
        weights = Tensor({b, m, n});
        for (std::size_t i = 0; i < weights.numel(); ++i) weights[i] = mask[i] * conf[i];
    }

    const auto pooled = [&] {
        switch (variant) {
            case 1: return pooling::masked_average_pool(y, mask, eps);
            case 2: return pooling::confidence_average_pool(y, conf, eps);
            case 3: return pooling::segconf_average_pool(y, mask, conf, eps);
            default: return pooling::average_pool(y);
        }
    };

    // Scalar objective: weighted sum of pooled outputs with fixed coefficients
    // so every pooled entry contributes to the gradient.
    Tensor coeff({b, d});
    for (auto& v : coeff.vec()) v = rng.normal();
    const auto loss = [&] {
        const Tensor out = pooled();
        double s = 0.0;
        for (std::size_t i = 0; i < out.numel(); ++i) s += coeff[i] * out[i];
        return s;
    };

    const Tensor g_y =
        pooling::pool_backward(coeff, weights, y.shape(), variant == 0 ? 0.0 : eps);
    std::vector<double> analytic(g_y.vec().begin(), g_y.vec().end());
    return ref::fd_compare(loss, tensor_ptrs(y), analytic, 1e-3);
}

std::vector<std::pair<std::string, ref::FdReport>> end_to_end_gradient_check(std::uint64_t seed) {
    E2eInstance inst = make_e2e(seed);
    const TensorMap grads = e2e_grads(inst);

    std::vector<std::pair<std::string, ref::FdReport>> reports;
    const auto loss = [&] { return e2e_loss(inst); };
    // Step 1e-5: at larger steps the probe crosses ReLU kinks for a handful
    // of weights, where the one-sided slope disagrees with the subgradient.
    for (const std::string group : {"encoder.", "decoder.", "projector."}) {
        std::vector<double*> values;
        std::vector<double> analytic;
        for (auto& [name, t] : inst.model.params()) {
            if (!name.starts_with(group)) continue;
            for (std::size_t i = 0; i < t.numel(); ++i) {
                values.push_back(&t[i]);
                analytic.push_back(grads.at(name)[i]);
            }
        }
        reports.emplace_back(group, ref::fd_compare(loss, values, analytic, 1e-5));
    }
    return reports;
}

std::vector<CheckResult> run_gradient_checks() {
    std::vector<CheckResult> results;
    char detail[128];

    {
        const auto r = bt_gradient_check(41, 16, 8);
        std::snprintf(detail, sizeof(detail), "%zu entries, max rel err %.3e", r.checked,
                      r.max_rel_err);
        results.push_back({"bt_loss_from_raw gradient vs central differences", r.pass(1e-4),
                           r.max_rel_err, detail});
    }
    const char* pool_names[] = {"average", "masked", "confidence", "segconf"};
    for (int v = 0; v < 4; ++v) {
        const auto r = pool_gradient_check(1000 + static_cast<std::uint64_t>(v), v);
        std::snprintf(detail, sizeof(detail), "%zu entries, max rel err %.3e", r.checked,
                      r.max_rel_err);
        results.push_back({std::string(pool_names[v]) + " pooling gradient vs central differences",
                           r.pass(1e-4), r.max_rel_err, detail});
    }
    for (const auto& [group, r] : end_to_end_gradient_check(7)) {
        std::snprintf(detail, sizeof(detail), "%zu entries, max rel err %.3e", r.checked,
                      r.max_rel_err);
        results.push_back({"end-to-end combined loss gradient, group " + group, r.pass(1e-3),
                           r.max_rel_err, detail});
    }
    return results;
}

std::vector<CheckResult> run_oracle_checks() {
    std::vector<CheckResult> results;
    char detail[128];
    constexpr double kTol = 1e-9;

    // Kernel oracles on 50 seeded instances each.
    {
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 50; ++s) {
            Rng rng(mix_seed(100, s));
            const std::size_t b = 2 + static_cast<std::size_t>(rng.uniform_int(0, 30));
            const std::size_t p = 2 + static_cast<std::size_t>(rng.uniform_int(0, 14));
            const Tensor z = random_matrix(rng, b, p, 3.0, 1.0);
            worst = std::max(worst, max_rel_err(bt::batch_normalize(z, 1e-5),
                                                ref::batch_normalize_loop(z, 1e-5)));
        }
        std::snprintf(detail, sizeof(detail), "50 instances, max rel err %.3e", worst);
        results.push_back({"batch_normalize vs scalar loop", worst <= kTol, worst, detail});
    }
    {
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 50; ++s) {
            Rng rng(mix_seed(200, s));
            const std::size_t b = 2 + static_cast<std::size_t>(rng.uniform_int(0, 30));
            const std::size_t p = 2 + static_cast<std::size_t>(rng.uniform_int(0, 14));
            const Tensor a = bt::batch_normalize(random_matrix(rng, b, p), 1e-5);
            const Tensor c = bt::batch_normalize(random_matrix(rng, b, p), 1e-5);
            worst = std::max(worst, max_rel_err(bt::cross_correlation(a, c).values,
                                                ref::cross_correlation_loop(a, c)));
        }
        std::snprintf(detail, sizeof(detail), "50 instances, max rel err %.3e", worst);
        results.push_back({"cross_correlation vs scalar loop", worst <= kTol, worst, detail});
    }
    {
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 50; ++s) {
            Rng rng(mix_seed(300, s));
            const std::size_t b = 2 + static_cast<std::size_t>(rng.uniform_int(0, 30));
            const std::size_t p = 2 + static_cast<std::size_t>(rng.uniform_int(0, 14));
            const Tensor z_a = random_matrix(rng, b, p, 2.0, -0.5);
            const Tensor z_b = random_matrix(rng, b, p, 2.0, 0.5);
            bt::LossWeights w;
            const double got = bt::bt_loss_from_raw(z_a, z_b, w);
            const double want =
                ref::bt_loss_from_raw_loop(z_a, z_b, 1.0 / static_cast<double>(p), w.epsilon);
            worst = std::max(worst, rel_err(got, want));
        }
        std::snprintf(detail, sizeof(detail), "50 instances, max rel err %.3e", worst);
        results.push_back({"bt_loss_from_raw vs scalar loop", worst <= kTol, worst, detail});
    }
    {
        const char* names[] = {"average_pool", "masked_average_pool", "confidence_average_pool",
                               "segconf_average_pool"};
        for (int variant = 0; variant < 4; ++variant) {
            double worst = 0.0;
            for (std::uint64_t s = 0; s < 50; ++s) {
                Rng rng(mix_seed(400 + static_cast<std::uint64_t>(variant), s));
                const std::size_t b = 1 + static_cast<std::size_t>(rng.uniform_int(0, 2));
                const std::size_t d = 1 + static_cast<std::size_t>(rng.uniform_int(0, 4));
                const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform_int(0, 6));
                const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(0, 6));
                const Tensor y = random_features(rng, b, d, m, n);
                Tensor mask({b, m, n});
                for (auto& v : mask.vec()) v = rng.bernoulli(0.7) ? 1.0 : 0.0;
                Tensor conf({b, m, n});
                for (auto& v : conf.vec()) v = rng.uniform();
                const double eps = 1e-6;
                Tensor got, want;
                switch (variant) {
                    case 0:
                        got = pooling::average_pool(y);
                        want = ref::average_pool_loop(y);
                        break;
                    case 1:
                        got = pooling::masked_average_pool(y, mask, eps);
                        want = ref::weighted_pool_loop(y, mask, eps);
                        break;
                    case 2:
                        got = pooling::confidence_average_pool(y, conf, eps);
                        want = ref::weighted_pool_loop(y, conf, eps);
                        break;
                    default: {
                        got = pooling::segconf_average_pool(y, mask, conf, eps);
                        Tensor w(mask.shape());
                        for (std::size_t i = 0; i < w.numel(); ++i) w[i] = mask[i] * conf[i];
                        want = ref::weighted_pool_loop(y, w, eps);
                        break;
                    }
                }
                worst = std::max(worst, max_rel_err(got, want));
            }
            std::snprintf(detail, sizeof(detail), "50 instances, max rel err %.3e", worst);
            results.push_back(
                {std::string(names[variant]) + " vs scalar loop", worst <= kTol, worst, detail});
        }
    }
    {
        double worst = 0.0;
        for (std::uint64_t s = 0; s < 50; ++s) {
            Rng rng(mix_seed(500, s));
            const std::size_t k = 2 + static_cast<std::size_t>(rng.uniform_int(0, 5));
            const std::size_t h = 9, w = 11;
            IntTensor pred({h, w}), gt({h, w});
            for (auto& v : pred.vec())
                v = static_cast<std::int32_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
            for (auto& v : gt.vec()) {
                v = static_cast<std::int32_t>(rng.uniform_int(0, static_cast<std::int64_t>(k) - 1));
                if (rng.bernoulli(0.1)) v = SegmentationMap::kIgnoreIndex;
            }
            metrics::ConfusionMatrix cm(k);
            cm.accumulate(pred, gt, SegmentationMap::kIgnoreIndex);
            bool any_defined = false;
            for (std::size_t c = 0; c < k; ++c) {
                std::uint64_t uni = 0;
                for (std::size_t o = 0; o < k; ++o) uni += cm.at(c, o) + cm.at(o, c);
                if (uni > 0) any_defined = true;
            }
            if (!any_defined) continue;
            const auto report = metrics::iou(cm);
            const auto want =
                ref::iou_loop(ref::confusion_loop(pred, gt, k, SegmentationMap::kIgnoreIndex), k);
            double mean_want = 0.0;
            std::size_t defined = 0;
            for (std::size_t c = 0; c < k; ++c) {
                if (want[c] < 0.0) {
                    check(!report.defined[c], "iou oracle: defined-class mismatch");
                    continue;
                }
                check(report.defined[c], "iou oracle: defined-class mismatch");
                worst = std::max(worst, rel_err(report.per_class_iou[c], want[c]));
                mean_want += want[c];
                ++defined;
            }
            worst = std::max(
                worst, rel_err(report.mean_iou, mean_want / static_cast<double>(defined)));
        }
        std::snprintf(detail, sizeof(detail), "50 instances, max rel err %.3e", worst);
        results.push_back({"confusion/IoU vs hand count", worst <= kTol, worst, detail});
    }
    {
        // Largest-interior-rectangle against exhaustive search.
        std::size_t failures = 0;
        for (std::uint64_t s = 0; s < 200; ++s) {
            Rng rng(mix_seed(600, s));
            const std::size_t h = 1 + static_cast<std::size_t>(rng.uniform_int(0, 23));
            const std::size_t w = 1 + static_cast<std::size_t>(rng.uniform_int(0, 23));
            const double density = rng.uniform(0.2, 0.9);
            Tensor mask({h, w});
            for (auto& v : mask.vec()) v = rng.bernoulli(density) ? 1.0 : 0.0;
            bool any = false;
            for (double v : mask.vec()) any = any || v == 1.0;
            if (!any)
                mask.at(static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(h) - 1)),
                        static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(w) - 1))) = 1.0;

            const auto rect = geometry::largest_interior_rectangle(mask);
            bool ok = rect.area() == ref::lir_brute_force_area(mask);
            for (std::size_t i = rect.top; ok && i < rect.top + rect.height; ++i)
                for (std::size_t j = rect.left; ok && j < rect.left + rect.width; ++j)
                    ok = mask.at(i, j) == 1.0;
            if (!ok) ++failures;
        }
        std::snprintf(detail, sizeof(detail), "200 masks, %zu failures", failures);
        results.push_back({"largest_interior_rectangle vs brute force", failures == 0,
                           static_cast<double>(failures), detail});
    }
    return results;
}

bool all_pass(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.pass) return false;
    return true;
}

std::string format_results(const std::vector<CheckResult>& results) {
    std::string out;
    for (const auto& r : results) {
        out += r.pass ? "[PASS] " : "[FAIL] ";
        out += r.name;
        if (!r.detail.empty()) {
            out += " (";
            out += r.detail;
            out += ")";
        }
        out += "\n";
    }
    return out;
}

}  // namespace btseg::selfcheck
