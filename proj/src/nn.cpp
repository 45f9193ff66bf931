#include "btseg/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "btseg/errors.hpp"

namespace btseg::nn {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
          bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        if (!accumulate) std::memset(crow, 0, n * sizeof(double));
        const double* arow = a + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_at(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* arow = a + kk * m;
        const double* brow = b + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* crow = c + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void gemm_bt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            if (accumulate)
                crow[j] += acc;
            else
                crow[j] = acc;
        }
    }
}

namespace {

struct ConvDims {
    std::size_t b, ic, h, w, oc, k, oh, ow;
};

ConvDims conv_dims(const Tensor& weight, const Tensor& x, std::size_t stride, std::size_t pad) {
    check(weight.rank() == 4, "conv2d: weight must be (oc,ic,k,k)");
    check(x.rank() == 4, "conv2d: input must be (b,c,h,w), got " + x.shape_str());
    check(weight.dim(2) == weight.dim(3), "conv2d: kernel must be square");
    check(weight.dim(1) == x.dim(1), "conv2d: channel mismatch");
    check(stride >= 1, "conv2d: stride must be >= 1");
    ConvDims d{};
    d.b = x.dim(0);
    d.ic = x.dim(1);
    d.h = x.dim(2);
    d.w = x.dim(3);
    d.oc = weight.dim(0);
    d.k = weight.dim(2);
    check(d.h + 2 * pad >= d.k && d.w + 2 * pad >= d.k, "conv2d: input smaller than kernel");
    d.oh = (d.h + 2 * pad - d.k) / stride + 1;
    d.ow = (d.w + 2 * pad - d.k) / stride + 1;
    return d;
}

/// im2col for one image: out (ic*k*k, oh*ow).
void im2col(const double* x, const ConvDims& d, std::size_t stride, std::size_t pad, double* col) {
    const std::size_t patch = d.oh * d.ow;
    for (std::size_t c = 0; c < d.ic; ++c)
        for (std::size_t ki = 0; ki < d.k; ++ki)
            for (std::size_t kj = 0; kj < d.k; ++kj) {
                double* crow = col + ((c * d.k + ki) * d.k + kj) * patch;
                for (std::size_t oy = 0; oy < d.oh; ++oy) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
                    double* dst = crow + oy * d.ow;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) {
                        std::memset(dst, 0, d.ow * sizeof(double));
                        continue;
                    }
                    const double* src = x + (c * d.h + static_cast<std::size_t>(iy)) * d.w;
                    for (std::size_t ox = 0; ox < d.ow; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kj) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w))
                                      ? 0.0
                                      : src[static_cast<std::size_t>(ix)];
                    }
                }
            }
}

/// Scatter-add of a column gradient back to image layout.
void col2im_add(const double* col, const ConvDims& d, std::size_t stride, std::size_t pad,
                double* g_x) {
    const std::size_t patch = d.oh * d.ow;
    for (std::size_t c = 0; c < d.ic; ++c)
        for (std::size_t ki = 0; ki < d.k; ++ki)
            for (std::size_t kj = 0; kj < d.k; ++kj) {
                const double* crow = col + ((c * d.k + ki) * d.k + kj) * patch;
                for (std::size_t oy = 0; oy < d.oh; ++oy) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy * stride + ki) - static_cast<std::ptrdiff_t>(pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.h)) continue;
                    double* dst = g_x + (c * d.h + static_cast<std::size_t>(iy)) * d.w;
                    const double* src = crow + oy * d.ow;
                    for (std::size_t ox = 0; ox < d.ow; ++ox) {
                        const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kj) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.w)) continue;
                        dst[static_cast<std::size_t>(ix)] += src[ox];
                    }
                }
            }
}

}  // namespace

Tensor conv2d_forward(const Tensor& weight, const Tensor& bias, const Tensor& x,
                      std::size_t stride, std::size_t pad) {
    const ConvDims d = conv_dims(weight, x, stride, pad);
    check(bias.rank() == 1 && bias.dim(0) == d.oc, "conv2d: bias shape mismatch");

    Tensor y({d.b, d.oc, d.oh, d.ow});
    const std::size_t patch = d.oh * d.ow;
    const std::size_t ckk = d.ic * d.k * d.k;
    std::vector<double> col(ckk * patch);
    for (std::size_t img = 0; img < d.b; ++img) {
        im2col(x.data() + img * d.ic * d.h * d.w, d, stride, pad, col.data());
        double* out = y.data() + img * d.oc * patch;
        gemm(d.oc, patch, ckk, weight.data(), col.data(), out, false);
        for (std::size_t c = 0; c < d.oc; ++c) {
            const double bv = bias[c];
            double* row = out + c * patch;
            for (std::size_t i = 0; i < patch; ++i) row[i] += bv;
        }
    }
    return y;
}

void conv2d_backward(const Tensor& weight, const Tensor& x, const Tensor& g_y, std::size_t stride,
                     std::size_t pad, Tensor* g_weight, Tensor* g_bias, Tensor* g_x) {
    const ConvDims d = conv_dims(weight, x, stride, pad);
    check(g_y.rank() == 4 && g_y.dim(0) == d.b && g_y.dim(1) == d.oc && g_y.dim(2) == d.oh &&
              g_y.dim(3) == d.ow,
          "conv2d_backward: output gradient shape mismatch");

    const std::size_t patch = d.oh * d.ow;
    const std::size_t ckk = d.ic * d.k * d.k;
    std::vector<double> col(ckk * patch);
    std::vector<double> g_col(ckk * patch);
    for (std::size_t img = 0; img < d.b; ++img) {
        const double* gy = g_y.data() + img * d.oc * patch;
        if (g_weight || g_x) im2col(x.data() + img * d.ic * d.h * d.w, d, stride, pad, col.data());
        if (g_weight)
            gemm_bt(d.oc, ckk, patch, gy, col.data(), g_weight->data(), true);
        if (g_bias)
            for (std::size_t c = 0; c < d.oc; ++c) {
                double acc = 0.0;
                const double* row = gy + c * patch;
                for (std::size_t i = 0; i < patch; ++i) acc += row[i];
                (*g_bias)[c] += acc;
            }
        if (g_x) {
            gemm_at(ckk, patch, d.oc, weight.data(), gy, g_col.data(), false);
            col2im_add(g_col.data(), d, stride, pad, g_x->data() + img * d.ic * d.h * d.w);
        }
    }
}

Tensor relu_forward(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& g_y, const Tensor& y) {
    check(g_y.same_shape(y), "relu_backward: shape mismatch");
    Tensor g_x(y.shape());
    for (std::size_t i = 0; i < y.numel(); ++i) g_x[i] = y[i] > 0.0 ? g_y[i] : 0.0;
    return g_x;
}

namespace {

struct Lerp {
    std::size_t lo, hi;
    double frac;
};

std::vector<Lerp> resize_axis(std::size_t out, std::size_t in) {
    std::vector<Lerp> map(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const std::size_t lo = static_cast<std::size_t>(std::floor(src));
        map[o] = Lerp{lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return map;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w) {
    check(x.rank() == 4, "resize_bilinear: input must be (b,c,h,w)");
    check(out_h >= 1 && out_w >= 1, "resize_bilinear: empty output");
    const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (out_h == h && out_w == w) return x;

    const auto ymap = resize_axis(out_h, h);
    const auto xmap = resize_axis(out_w, w);
    Tensor y({b, c, out_h, out_w});
    for (std::size_t img = 0; img < b; ++img)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double* plane = x.data() + (img * c + ch) * h * w;
            double* out = y.data() + (img * c + ch) * out_h * out_w;
            for (std::size_t oy = 0; oy < out_h; ++oy) {
                const auto& my = ymap[oy];
                const double* r0 = plane + my.lo * w;
                const double* r1 = plane + my.hi * w;
                for (std::size_t ox = 0; ox < out_w; ++ox) {
                    const auto& mx = xmap[ox];
                    const double top = (1.0 - mx.frac) * r0[mx.lo] + mx.frac * r0[mx.hi];
                    const double bot = (1.0 - mx.frac) * r1[mx.lo] + mx.frac * r1[mx.hi];
                    out[oy * out_w + ox] = (1.0 - my.frac) * top + my.frac * bot;
                }
            }
        }
    return y;
}

Tensor resize_bilinear_backward(const Tensor& g_y, std::size_t in_h, std::size_t in_w) {
    check(g_y.rank() == 4, "resize_bilinear_backward: gradient must be (b,c,h,w)");
    const std::size_t b = g_y.dim(0), c = g_y.dim(1), oh = g_y.dim(2), ow = g_y.dim(3);
    if (oh == in_h && ow == in_w) return g_y;

    const auto ymap = resize_axis(oh, in_h);
    const auto xmap = resize_axis(ow, in_w);
    Tensor g_x({b, c, in_h, in_w});
    for (std::size_t img = 0; img < b; ++img)
        for (std::size_t ch = 0; ch < c; ++ch) {
            double* plane = g_x.data() + (img * c + ch) * in_h * in_w;
            const double* g = g_y.data() + (img * c + ch) * oh * ow;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                const auto& my = ymap[oy];
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const auto& mx = xmap[ox];
                    const double gv = g[oy * ow + ox];
                    plane[my.lo * in_w + mx.lo] += (1.0 - my.frac) * (1.0 - mx.frac) * gv;
                    plane[my.lo * in_w + mx.hi] += (1.0 - my.frac) * mx.frac * gv;
                    plane[my.hi * in_w + mx.lo] += my.frac * (1.0 - mx.frac) * gv;
                    plane[my.hi * in_w + mx.hi] += my.frac * mx.frac * gv;
                }
            }
        }
    return g_x;
}

Tensor linear_forward(const Tensor& weight, const Tensor& bias, const Tensor& x) {
    check(weight.rank() == 2 && x.rank() == 2, "linear: weight (out,in), x (n,in)");
    check(weight.dim(1) == x.dim(1), "linear: dimension mismatch");
    const std::size_t n = x.dim(0), in = x.dim(1), out = weight.dim(0);
    check(bias.rank() == 1 && bias.dim(0) == out, "linear: bias shape mismatch");
    Tensor y({n, out});
    gemm_bt(n, out, in, x.data(), weight.data(), y.data(), false);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < out; ++j) y.at(i, j) += bias[j];
    return y;
}

void linear_backward(const Tensor& weight, const Tensor& x, const Tensor& g_y, Tensor* g_weight,
                     Tensor* g_bias, Tensor* g_x) {
    const std::size_t n = x.dim(0), in = x.dim(1), out = weight.dim(0);
    check(g_y.rank() == 2 && g_y.dim(0) == n && g_y.dim(1) == out,
          "linear_backward: gradient shape mismatch");
    if (g_weight) gemm_at(out, in, n, g_y.data(), x.data(), g_weight->data(), true);
    if (g_bias)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < out; ++j) (*g_bias)[j] += g_y.at(i, j);
    if (g_x) gemm(n, in, out, g_y.data(), weight.data(), g_x->data(), false);
}

Tensor batchnorm_forward_train(const Tensor& gamma, const Tensor& beta, const Tensor& x,
                               double epsilon, double momentum, Tensor* running_mean,
                               Tensor* running_var, bool update_running, BatchNormCache* cache) {
    check(x.rank() == 2, "batchnorm: input must be (n,f)");
    const std::size_t n = x.dim(0), f = x.dim(1);
    check(n >= 2, "batchnorm: training requires batch size >= 2");
    check(gamma.dim(0) == f && beta.dim(0) == f, "batchnorm: parameter shape mismatch");

    Tensor y({n, f});
    if (cache) {
        cache->x_hat = Tensor({n, f});
        cache->inv_std.assign(f, 0.0);
    }
    for (std::size_t j = 0; j < f; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += x.at(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x.at(i, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv_std = 1.0 / std::sqrt(var + epsilon);
        for (std::size_t i = 0; i < n; ++i) {
            const double xh = (x.at(i, j) - mean) * inv_std;
            if (cache) cache->x_hat.at(i, j) = xh;
            y.at(i, j) = gamma[j] * xh + beta[j];
        }
        if (cache) cache->inv_std[j] = inv_std;
        if (update_running) {
            (*running_mean)[j] = (1.0 - momentum) * (*running_mean)[j] + momentum * mean;
            (*running_var)[j] = (1.0 - momentum) * (*running_var)[j] + momentum * var;
        }
    }
    return y;
}

Tensor batchnorm_forward_eval(const Tensor& gamma, const Tensor& beta, const Tensor& running_mean,
                              const Tensor& running_var, const Tensor& x, double epsilon) {
    check(x.rank() == 2, "batchnorm: input must be (n,f)");
    const std::size_t n = x.dim(0), f = x.dim(1);
    Tensor y({n, f});
    for (std::size_t j = 0; j < f; ++j) {
        const double inv_std = 1.0 / std::sqrt(running_var[j] + epsilon);
        for (std::size_t i = 0; i < n; ++i)
            y.at(i, j) = gamma[j] * (x.at(i, j) - running_mean[j]) * inv_std + beta[j];
    }
    return y;
}

void batchnorm_backward(const Tensor& gamma, const BatchNormCache& cache, const Tensor& g_y,
                        Tensor* g_gamma, Tensor* g_beta, Tensor* g_x) {
    const std::size_t n = g_y.dim(0), f = g_y.dim(1);
    check(cache.x_hat.same_shape(g_y), "batchnorm_backward: cache/gradient mismatch");
    for (std::size_t j = 0; j < f; ++j) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum_g += g_y.at(i, j);
            sum_gx += g_y.at(i, j) * cache.x_hat.at(i, j);
        }
        if (g_gamma) (*g_gamma)[j] += sum_gx;
        if (g_beta) (*g_beta)[j] += sum_g;
        if (g_x) {
            const double mean_g = sum_g / static_cast<double>(n);
            const double mean_gx = sum_gx / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i)
                g_x->at(i, j) = gamma[j] * cache.inv_std[j] *
                                (g_y.at(i, j) - mean_g - cache.x_hat.at(i, j) * mean_gx);
        }
    }
}

CeResult softmax_cross_entropy(const Tensor& logits, const IntTensor& labels,
                               std::int32_t ignore_index, bool need_grad) {
    check(logits.rank() == 3, "softmax_cross_entropy: logits must be (c,h,w)");
    check(labels.rank() == 2, "softmax_cross_entropy: labels must be (h,w)");
    const std::size_t c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
    check(labels.dim(0) == h && labels.dim(1) == w, "softmax_cross_entropy: shape mismatch");

    CeResult r;
    if (need_grad) r.g_logits = Tensor({c, h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j)
            if (labels.at(i, j) != ignore_index) ++r.scored_pixels;
    if (r.scored_pixels == 0) return r;
    const double inv_count = 1.0 / static_cast<double>(r.scored_pixels);

    std::vector<double> probs(c);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const std::int32_t gt = labels.at(i, j);
            if (gt == ignore_index) continue;
            check(gt >= 0 && static_cast<std::size_t>(gt) < c,
                  "softmax_cross_entropy: label out of range: " + std::to_string(gt));
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t ch = 0; ch < c; ++ch) mx = std::max(mx, logits.at(ch, i, j));
            double denom = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
                probs[ch] = std::exp(logits.at(ch, i, j) - mx);
                denom += probs[ch];
            }
            const double p_gt = probs[static_cast<std::size_t>(gt)] / denom;
            r.loss -= std::log(std::max(p_gt, 1e-300)) * inv_count;
            if (need_grad)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double p = probs[ch] / denom;
                    r.g_logits.at(ch, i, j) =
                        (p - (ch == static_cast<std::size_t>(gt) ? 1.0 : 0.0)) * inv_count;
                }
        }
    return r;
}

IntTensor argmax_channel(const Tensor& logits) {
    check(logits.rank() == 3, "argmax_channel: logits must be (c,h,w)");
    const std::size_t c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
    IntTensor out({h, w});
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            std::size_t best = 0;
            double bv = logits.at(0, i, j);
            for (std::size_t ch = 1; ch < c; ++ch)
                if (logits.at(ch, i, j) > bv) {
                    bv = logits.at(ch, i, j);
                    best = ch;
                }
            out.at(i, j) = static_cast<std::int32_t>(best);
        }
    return out;
}

}  // namespace btseg::nn
