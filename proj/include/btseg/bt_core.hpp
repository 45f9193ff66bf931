#pragma once

#include "btseg/tensor.hpp"

namespace btseg::bt {

enum class Domain { source, target };

/// Batch of embedding vectors, one row per image: shape (b, p), b >= 2.
struct Embedding {
    Tensor values;
    Domain domain = Domain::source;

    std::size_t batch() const { return values.dim(0); }
    std::size_t dim() const { return values.dim(1); }
};

/// p x p matrix of per-dimension correlations between two normalized batches.
struct CrossCorrelation {
    Tensor values;

    std::size_t dim() const { return values.dim(0); }
};

struct LossWeights {
    double lambda_bt = 0.0;  // off-diagonal weight; 0 means "use 1/p"
    double alpha = 0.1;      // balance between CE and BT terms
    double epsilon = 1e-5;   // batch-normalization damping

    void validate() const;
};

/// Normalizes each column to zero mean and unit population standard deviation,
/// damped as (x - mean) / sqrt(var + epsilon). Constant columns map to zero.
Tensor batch_normalize(const Tensor& z, double epsilon);

inline Embedding batch_normalize(const Embedding& z, double epsilon) {
    return Embedding{batch_normalize(z.values, epsilon), z.domain};
}

/// C[i][j] = (1/b) * sum_k a[k][i] * b[k][j]; inputs must already be
/// batch-normalized so that the self-correlation diagonal is 1.
CrossCorrelation cross_correlation(const Tensor& z_a, const Tensor& z_b);

inline CrossCorrelation cross_correlation(const Embedding& a, const Embedding& b) {
    return cross_correlation(a.values, b.values);
}

/// sum_i (1 - C_ii)^2 + lambda * sum_{i != j} C_ij^2
double bt_loss(const CrossCorrelation& c, double lambda_bt);

/// 1/p, the tuning-free off-diagonal weight.
double default_lambda(std::size_t p);

/// l_ce + alpha * l_bt
double combined_loss(double l_ce, double l_bt, double alpha);

/// Full pipeline on raw (unnormalized) embeddings.
double bt_loss_from_raw(const Tensor& z_a, const Tensor& z_b, const LossWeights& weights);

inline double bt_loss_from_raw(const Embedding& a, const Embedding& b, const LossWeights& w) {
    return bt_loss_from_raw(a.values, b.values, w);
}

struct BtGradients {
    Tensor d_z_a;
    Tensor d_z_b;
};

/// Exact analytic gradient of bt_loss_from_raw with respect to both raw
/// inputs, including the batch-statistics terms of the normalization.
BtGradients bt_loss_backward(const Tensor& z_a, const Tensor& z_b, const LossWeights& weights);

/// Gradient under the embedding-cache convention: normalization statistics
/// and every other row are held constant, so row k of the result depends only
/// on the loss surface seen by image k's own embedding.
BtGradients bt_loss_backward_stats_const(const Tensor& z_a, const Tensor& z_b,
                                         const LossWeights& weights);

}  // namespace btseg::bt
