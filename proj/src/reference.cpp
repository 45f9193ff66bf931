#include "btseg/reference.hpp"

#include <algorithm>
#include <cmath>

#include "btseg/errors.hpp"

namespace btseg::ref {

Tensor batch_normalize_loop(const Tensor& z, double epsilon) {
    const std::size_t b = z.dim(0), p = z.dim(1);
    Tensor out({b, p});
    for (std::size_t j = 0; j < p; ++j) {
        double sum = 0.0;
        for (std::size_t k = 0; k < b; ++k) sum = sum + z.at(k, j);
        const double mean = sum / static_cast<double>(b);
        double sq = 0.0;
        for (std::size_t k = 0; k < b; ++k) sq = sq + (z.at(k, j) - mean) * (z.at(k, j) - mean);
        const double var = sq / static_cast<double>(b);
        for (std::size_t k = 0; k < b; ++k)
            out.at(k, j) = (z.at(k, j) - mean) / std::sqrt(var + epsilon);
    }
    return out;
}

Tensor cross_correlation_loop(const Tensor& z_a, const Tensor& z_b) {
    const std::size_t b = z_a.dim(0), p = z_a.dim(1);
    Tensor c({p, p});
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < b; ++k) s = s + z_a.at(k, i) * z_b.at(k, j);
            c.at(i, j) = s / static_cast<double>(b);
        }
    return c;
}

double bt_loss_loop(const Tensor& c, double lambda_bt) {
    const std::size_t p = c.dim(0);
    double loss = 0.0;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            if (i == j)
                loss += (1.0 - c.at(i, j)) * (1.0 - c.at(i, j));
            else
                loss += lambda_bt * c.at(i, j) * c.at(i, j);
        }
    return loss;
}

double bt_loss_from_raw_loop(const Tensor& z_a, const Tensor& z_b, double lambda_bt,
                             double epsilon) {
    return bt_loss_loop(
        cross_correlation_loop(batch_normalize_loop(z_a, epsilon), batch_normalize_loop(z_b, epsilon)),
        lambda_bt);
}

Tensor average_pool_loop(const Tensor& y) {
    const std::size_t b = y.dim(0), d = y.dim(1), m = y.dim(2), n = y.dim(3);
    Tensor out({b, d});
    for (std::size_t s = 0; s < b; ++s)
        for (std::size_t c = 0; c < d; ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) acc = acc + y.at(s, c, i, j);
            out.at(s, c) = acc / static_cast<double>(m * n);
        }
    return out;
}

Tensor weighted_pool_loop(const Tensor& y, const Tensor& w, double epsilon) {
    const std::size_t b = y.dim(0), d = y.dim(1), m = y.dim(2), n = y.dim(3);
    Tensor out({b, d});
    for (std::size_t s = 0; s < b; ++s)
        for (std::size_t c = 0; c < d; ++c) {
            double num = 0.0, den = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    num = num + y.at(s, c, i, j) * w.at(s, i, j);
                    den = den + w.at(s, i, j);
                }
            out.at(s, c) = num / (den + epsilon);
        }
    return out;
}

std::size_t lir_brute_force_area(const Tensor& valid) {
    const std::size_t h = valid.dim(0), w = valid.dim(1);
    std::size_t best = 0;
    std::vector<bool> col_ok(w);
    for (std::size_t top = 0; top < h; ++top) {
        std::fill(col_ok.begin(), col_ok.end(), true);
        for (std::size_t bottom = top; bottom < h; ++bottom) {
            for (std::size_t j = 0; j < w; ++j)
                if (valid.at(bottom, j) != 1.0) col_ok[j] = false;
            const std::size_t height = bottom - top + 1;
            std::size_t run = 0;
            for (std::size_t j = 0; j < w; ++j) {
                run = col_ok[j] ? run + 1 : 0;
                best = std::max(best, run * height);
            }
        }
    }
    return best;
}

std::vector<std::uint64_t> confusion_loop(const IntTensor& pred, const IntTensor& gt,
                                          std::size_t num_classes, std::int32_t ignore_index) {
    std::vector<std::uint64_t> counts(num_classes * num_classes, 0);
    for (std::size_t i = 0; i < gt.numel(); ++i) {
        if (gt[i] == ignore_index) continue;
        counts[static_cast<std::size_t>(gt[i]) * num_classes + static_cast<std::size_t>(pred[i])]++;
    }
    return counts;
}

std::vector<double> iou_loop(const std::vector<std::uint64_t>& counts, std::size_t num_classes) {
    std::vector<double> out(num_classes, -1.0);
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::uint64_t tp = counts[c * num_classes + c];
        std::uint64_t fp = 0, fn = 0;
        for (std::size_t o = 0; o < num_classes; ++o) {
            if (o == c) continue;
            fp += counts[o * num_classes + c];
            fn += counts[c * num_classes + o];
        }
        if (tp + fp + fn > 0)
            out[c] = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    }
    return out;
}

FdReport fd_compare(const std::function<double()>& loss, const std::vector<double*>& values,
                    const std::vector<double>& analytic, double step, double abs_floor) {
    check(values.size() == analytic.size(), "fd_compare: value/gradient count mismatch");
    FdReport report;
    for (std::size_t i = 0; i < values.size(); ++i) {
        double* v = values[i];
        const double saved = *v;
        *v = saved + step;
        const double plus = loss();
        *v = saved - step;
        const double minus = loss();
        *v = saved;
        const double numeric = (plus - minus) / (2.0 * step);
        const double abs_err = std::fabs(numeric - analytic[i]);
        report.max_abs_err = std::max(report.max_abs_err, abs_err);
        const double scale = std::max(std::fabs(numeric), std::fabs(analytic[i]));
        if (abs_err > abs_floor && scale > 0.0)
            report.max_rel_err = std::max(report.max_rel_err, abs_err / scale);
        ++report.checked;
    }
    return report;
}

}  // namespace btseg::ref
