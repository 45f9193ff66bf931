#include "btseg/bt_core.hpp"

#include <cmath>
#include <vector>

#include "btseg/errors.hpp"

namespace btseg::bt {

namespace {

struct NormResult {
    Tensor normalized;
    std::vector<double> inv_std;  // 1 / sqrt(var + eps) per column
};

NormResult normalize_with_stats(const Tensor& z, double epsilon) {
    check(z.rank() == 2, "batch_normalize: expected a (b, p) matrix, got " + z.shape_str());
    const std::size_t b = z.dim(0);
    const std::size_t p = z.dim(1);
    check(b >= 2, "batch_normalize: batch size must be >= 2, got " + std::to_string(b));
    check(epsilon > 0.0, "batch_normalize: epsilon must be positive");
    check(all_finite(z), "batch_normalize: input contains non-finite entries");

    NormResult r{Tensor({b, p}), std::vector<double>(p)};
    for (std::size_t j = 0; j < p; ++j) {
        double mean = 0.0;
        for (std::size_t k = 0; k < b; ++k) mean += z.at(k, j);
        mean /= static_cast<double>(b);
        double var = 0.0;
        for (std::size_t k = 0; k < b; ++k) {
            const double d = z.at(k, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(b);
        const double inv_std = 1.0 / std::sqrt(var + epsilon);
        r.inv_std[j] = inv_std;
        for (std::size_t k = 0; k < b; ++k)
            r.normalized.at(k, j) = (z.at(k, j) - mean) * inv_std;
    }
    return r;
}

/// dL/dC for the Barlow Twins loss.
Tensor loss_grad_wrt_c(const Tensor& c, double lambda_bt) {
    const std::size_t p = c.dim(0);
    Tensor g({p, p});
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j)
            g.at(i, j) = (i == j) ? 2.0 * (c.at(i, j) - 1.0) : 2.0 * lambda_bt * c.at(i, j);
    return g;
}

double resolve_lambda(const LossWeights& w, std::size_t p) {
    return w.lambda_bt > 0.0 ? w.lambda_bt : default_lambda(p);
}

}  // namespace

void LossWeights::validate() const {
    check(lambda_bt >= 0.0, "LossWeights: lambda_bt must be positive (or 0 for the 1/p default)");
    check(epsilon > 0.0, "LossWeights: epsilon must be positive");
    check(alpha >= 0.0, "LossWeights: alpha must be nonnegative");
}

Tensor batch_normalize(const Tensor& z, double epsilon) {
    return normalize_with_stats(z, epsilon).normalized;
}

CrossCorrelation cross_correlation(const Tensor& z_a, const Tensor& z_b) {
    check(z_a.rank() == 2 && z_b.rank() == 2, "cross_correlation: expected (b, p) matrices");
    check(z_a.same_shape(z_b), "cross_correlation: shape mismatch " + z_a.shape_str() + " vs " +
                                   z_b.shape_str());
    const std::size_t b = z_a.dim(0);
    const std::size_t p = z_a.dim(1);
    Tensor c({p, p});
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < b; ++k) acc += z_a.at(k, i) * z_b.at(k, j);
            c.at(i, j) = acc * inv_b;
        }
    return CrossCorrelation{std::move(c)};
}

double bt_loss(const CrossCorrelation& c, double lambda_bt) {
    check(c.values.rank() == 2 && c.values.dim(0) == c.values.dim(1),
          "bt_loss: cross-correlation matrix must be square, got " + c.values.shape_str());
    check(lambda_bt > 0.0, "bt_loss: lambda must be positive");
    const std::size_t p = c.dim();
    double on_diag = 0.0;
    double off_diag = 0.0;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            const double v = c.values.at(i, j);
            if (i == j)
                on_diag += (1.0 - v) * (1.0 - v);
            else
                off_diag += v * v;
        }
    return on_diag + lambda_bt * off_diag;
}

double default_lambda(std::size_t p) {
    check(p >= 2, "default_lambda: embedding dimension must be >= 2");
    return 1.0 / static_cast<double>(p);
}

double combined_loss(double l_ce, double l_bt, double alpha) {
    check(std::isfinite(l_ce) && std::isfinite(l_bt), "combined_loss: losses must be finite");
    check(l_ce >= 0.0 && l_bt >= 0.0 && alpha >= 0.0,
          "combined_loss: losses and alpha must be nonnegative");
    return l_ce + alpha * l_bt;
}

double bt_loss_from_raw(const Tensor& z_a, const Tensor& z_b, const LossWeights& weights) {
    weights.validate();
    check(z_a.same_shape(z_b), "bt_loss_from_raw: shape mismatch");
    const auto n_a = batch_normalize(z_a, weights.epsilon);
    const auto n_b = batch_normalize(z_b, weights.epsilon);
    const auto c = cross_correlation(n_a, n_b);
    return bt_loss(c, resolve_lambda(weights, c.dim()));
}

BtGradients bt_loss_backward(const Tensor& z_a, const Tensor& z_b, const LossWeights& weights) {
    weights.validate();
    check(z_a.same_shape(z_b), "bt_loss_backward: shape mismatch");
    const std::size_t b = z_a.dim(0);
    const std::size_t p = z_a.dim(1);

    const auto na = normalize_with_stats(z_a, weights.epsilon);
    const auto nb = normalize_with_stats(z_b, weights.epsilon);
    const auto c = cross_correlation(na.normalized, nb.normalized);
    const auto g_c = loss_grad_wrt_c(c.values, resolve_lambda(weights, p));

    // dL/d(normalized): g_na[k][i] = (1/b) sum_j G[i][j] * nb[k][j]
    Tensor g_na({b, p}), g_nb({b, p});
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t k = 0; k < b; ++k)
        for (std::size_t i = 0; i < p; ++i) {
            double sa = 0.0, sb = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                sa += g_c.at(i, j) * nb.normalized.at(k, j);
                sb += g_c.at(j, i) * na.normalized.at(k, j);
            }
            g_na.at(k, i) = sa * inv_b;
            g_nb.at(k, i) = sb * inv_b;
        }

    // Per-column batch-normalization backward:
    // dL/dx_k = inv_std * (g_k - mean(g) - y_k * mean(g * y))
    auto bn_backward = [b, p](const NormResult& n, const Tensor& g) {
        Tensor out({b, p});
        for (std::size_t j = 0; j < p; ++j) {
            double mean_g = 0.0, mean_gy = 0.0;
            for (std::size_t k = 0; k < b; ++k) {
                mean_g += g.at(k, j);
                mean_gy += g.at(k, j) * n.normalized.at(k, j);
            }
            mean_g /= static_cast<double>(b);
            mean_gy /= static_cast<double>(b);
            for (std::size_t k = 0; k < b; ++k)
                out.at(k, j) =
                    n.inv_std[j] * (g.at(k, j) - mean_g - n.normalized.at(k, j) * mean_gy);
        }
        return out;
    };

    return BtGradients{bn_backward(na, g_na), bn_backward(nb, g_nb)};
}

BtGradients bt_loss_backward_stats_const(const Tensor& z_a, const Tensor& z_b,
                                         const LossWeights& weights) {
    weights.validate();
    check(z_a.same_shape(z_b), "bt_loss_backward_stats_const: shape mismatch");
    const std::size_t b = z_a.dim(0);
    const std::size_t p = z_a.dim(1);

    const auto na = normalize_with_stats(z_a, weights.epsilon);
    const auto nb = normalize_with_stats(z_b, weights.epsilon);
    const auto c = cross_correlation(na.normalized, nb.normalized);
    const auto g_c = loss_grad_wrt_c(c.values, resolve_lambda(weights, p));

    // With means and variances frozen, d(normalized)/d(raw) is just inv_std.
    Tensor g_za({b, p}), g_zb({b, p});
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t k = 0; k < b; ++k)
        for (std::size_t i = 0; i < p; ++i) {
            double sa = 0.0, sb = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                sa += g_c.at(i, j) * nb.normalized.at(k, j);
                sb += g_c.at(j, i) * na.normalized.at(k, j);
            }
            g_za.at(k, i) = sa * inv_b * na.inv_std[i];
            g_zb.at(k, i) = sb * inv_b * nb.inv_std[i];
        }
    return BtGradients{std::move(g_za), std::move(g_zb)};
}

}  // namespace btseg::bt
