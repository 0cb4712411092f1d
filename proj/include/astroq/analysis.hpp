// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "astroq/matrix.hpp"
#include "astroq/quant.hpp"
#include "astroq/reg.hpp"

namespace astroq {

/// Per-group outlier statistics. max_abs_before/after take the max over all
/// output channels of the group's weight magnitudes; reduction_pct is
/// 100 * (before - after) / before, defined as 0 when before is 0.
struct GroupStat {
    std::size_t k = 0;
    double activation_norm = 0.0;
    double alpha = 0.0;
    double max_abs_before = 0.0;
    double max_abs_after = 0.0;
    double reduction_pct = 0.0;
};

/// Layer-level quality report.
///   recon_error    || X W_orig - X dequant ||_F  (end-to-end error)
///   bound          coupled error bound evaluated on the quantized matrix
///   fidelity_ratio || X W_new - X W_orig ||_F / || X W_orig ||_F
///   group_stats    sorted by activation_norm descending
struct LayerReport {
    double recon_error = 0.0;
    double bound = 0.0;
    double fidelity_ratio = 0.0;
    std::vector<GroupStat> group_stats;

    // config echo
    int bits = 0;
    std::size_t group_size = 0;
    std::size_t num_groups = 0;
};

/// Upper bound on || X W - X Q(W) ||_F for symmetric group-wise quantization:
///   sqrt(g) / (2 (2^{b-1} - 1)) * sum_j sum_k ||X^(k)||_F * ||W^(k,j)||_inf
double error_bound(const DenseMatrix& x, const DenseMatrix& weights,
                   const GroupScheme& scheme, int bits);

/// Composite per-column objective
///   1/2 ||X w - X w_orig||_2^2 + beta * sum_k alpha_k ||w^(k)||_inf
double objective_value(const DenseMatrix& x, std::span<const double> w,
                       std::span<const double> w_orig,
                       const AlphaVector& alpha, const GroupScheme& scheme,
                       double beta);

/// Builds the full report for one reconstructed and quantized layer. The
/// bound is evaluated on w_new (the matrix that was quantized); recon_error
/// measures against w_orig.
LayerReport layer_report(const DenseMatrix& x, const DenseMatrix& w_orig,
                         const DenseMatrix& w_new, const QuantizedLayer& q,
                         const AlphaVector& alpha, const GroupScheme& scheme);

/// Frobenius norms of the activation column blocks, one per group.
std::vector<double> group_activation_norms(const DenseMatrix& x,
                                           const GroupScheme& scheme);

} // namespace astroq
