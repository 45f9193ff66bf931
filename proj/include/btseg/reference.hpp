#pragma once

#include <functional>
#include <set>
#include <vector>

#include "btseg/geometry.hpp"
#include "btseg/tensor.hpp"

namespace btseg::ref {

// Element-by-element reference implementations, deliberately written as plain
// scalar loops with no shared code paths into the main kernels. They anchor
// the oracle suites and the `check` subcommand.

Tensor batch_normalize_loop(const Tensor& z, double epsilon);
Tensor cross_correlation_loop(const Tensor& z_a, const Tensor& z_b);
double bt_loss_loop(const Tensor& c, double lambda_bt);
double bt_loss_from_raw_loop(const Tensor& z_a, const Tensor& z_b, double lambda_bt,
                             double epsilon);

Tensor average_pool_loop(const Tensor& y);
/// Weighted pool with weights (b,m,n); matches all three weighted variants
/// once the combined weight plane is formed.
Tensor weighted_pool_loop(const Tensor& y, const Tensor& w, double epsilon);

/// O(h^2 w) exhaustive search over all-valid rectangles; returns the maximal
/// area (0 for an all-invalid mask).
std::size_t lir_brute_force_area(const Tensor& valid);

/// Hand confusion-matrix walk; counts[gt * k + pred].
std::vector<std::uint64_t> confusion_loop(const IntTensor& pred, const IntTensor& gt,
                                          std::size_t num_classes, std::int32_t ignore_index);
/// Per-class IoU from raw counts; undefined classes get -1.
std::vector<double> iou_loop(const std::vector<std::uint64_t>& counts, std::size_t num_classes);

// ---- central finite differences ----

struct FdReport {
    /// Worst relative error among entries whose absolute error exceeds the
    /// floor; entries below the floor are within finite-difference noise.
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::size_t checked = 0;
    bool pass(double rel_tol) const { return max_rel_err < rel_tol; }
};

/// Central differences with the given step over every listed scalar, compared
/// entry-wise against `analytic`.
FdReport fd_compare(const std::function<double()>& loss, const std::vector<double*>& values,
                    const std::vector<double>& analytic, double step, double abs_floor = 1e-8);

}  // namespace btseg::ref
