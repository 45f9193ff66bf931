#pragma once

#include <cstddef>

#include "btseg/tensor.hpp"
#include "btseg/types.hpp"

namespace btseg::nn {

// ---- small GEMM kernels (row-major) ----

/// C[M,N] (+)= A[M,K] * B[K,N]
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
          bool accumulate);

/// C[M,N] (+)= A[K,M]^T * B[K,N]
void gemm_at(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate);

/// C[M,N] (+)= A[M,K] * B[N,K]^T
void gemm_bt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool accumulate);

// ---- convolution ----

/// weight (oc, ic, k, k), bias (oc); x (b, ic, h, w) -> (b, oc, oh, ow)
Tensor conv2d_forward(const Tensor& weight, const Tensor& bias, const Tensor& x,
                      std::size_t stride, std::size_t pad);

/// Accumulates into g_weight / g_bias; writes the input gradient to g_x when
/// it is non-null.
void conv2d_backward(const Tensor& weight, const Tensor& x, const Tensor& g_y, std::size_t stride,
                     std::size_t pad, Tensor* g_weight, Tensor* g_bias, Tensor* g_x);

// ---- pointwise ----

Tensor relu_forward(const Tensor& x);
/// Mask taken from the forward output: gradient passes where y > 0.
Tensor relu_backward(const Tensor& g_y, const Tensor& y);

// ---- bilinear resize (fixed, differentiable) ----

/// (b, c, h, w) -> (b, c, out_h, out_w); preserves constants.
Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);
Tensor resize_bilinear_backward(const Tensor& g_y, std::size_t in_h, std::size_t in_w);

// ---- linear ----

/// weight (out, in), bias (out); x (n, in) -> (n, out)
Tensor linear_forward(const Tensor& weight, const Tensor& bias, const Tensor& x);
void linear_backward(const Tensor& weight, const Tensor& x, const Tensor& g_y, Tensor* g_weight,
                     Tensor* g_bias, Tensor* g_x);

// ---- 1-D batch normalization over the batch dimension ----

struct BatchNormCache {
    Tensor x_hat;                 // (n, f)
    std::vector<double> inv_std;  // per feature
};

/// Training mode: batch statistics (population variance). Running buffers are
/// updated only when update_running is set, so repeated evaluations (finite
/// differences) stay pure.
Tensor batchnorm_forward_train(const Tensor& gamma, const Tensor& beta, const Tensor& x,
                               double epsilon, double momentum, Tensor* running_mean,
                               Tensor* running_var, bool update_running, BatchNormCache* cache);

Tensor batchnorm_forward_eval(const Tensor& gamma, const Tensor& beta, const Tensor& running_mean,
                              const Tensor& running_var, const Tensor& x, double epsilon);

void batchnorm_backward(const Tensor& gamma, const BatchNormCache& cache, const Tensor& g_y,
                        Tensor* g_gamma, Tensor* g_beta, Tensor* g_x);

// ---- softmax cross-entropy over class channel ----

struct CeResult {
    double loss = 0.0;
    Tensor g_logits;  // (c, h, w), zero on ignored pixels, mean-reduced
    std::size_t scored_pixels = 0;
};

/// logits (c, h, w) against labels (h, w); mean reduction over scored pixels.
CeResult softmax_cross_entropy(const Tensor& logits, const IntTensor& labels,
                               std::int32_t ignore_index, bool need_grad);

/// Per-pixel argmax over the class channel: (c, h, w) -> (h, w).
IntTensor argmax_channel(const Tensor& logits);

}  // namespace btseg::nn
