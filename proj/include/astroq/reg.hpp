// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "astroq/matrix.hpp"
#include "astroq/quant.hpp"

namespace astroq {

enum class RegMode { astro, uniform };

/// Proximal-gradient reconstruction settings.
///   beta            regularization strength (0 permitted: pure fidelity)
///   iters           fixed iteration count, no early stopping
///   mode            astro = activation-guided coefficients, uniform = all-ones
///   step_size_scale multiplier on the 1/lambda_max step, in (0, 1]
struct RegConfig {
    double beta = 3e-5;
    std::size_t iters = 200;
    RegMode mode = RegMode::astro;
    double step_size_scale = 1.0;
};

/// Per-group regularization coefficients, normalized to mean 1.
struct AlphaVector {
    std::vector<double> values;
};

/// Objective value at initialization and after each iteration (iters + 1
/// entries) plus the final smooth-part gradient norm.
struct PgdTrace {
    std::vector<double> objective_values;
    double final_grad_norm = 0.0;
};

struct ColumnResult {
    std::vector<double> weights;
    PgdTrace trace;
};

struct LayerResult {
    DenseMatrix weights;
    std::vector<PgdTrace> traces;
};

/// Activation-guided coefficients: group Frobenius norms of X divided by
/// their mean (computed as ratios to the largest norm first, which keeps the
/// result exactly invariant under dyadic rescaling of X and robust against
/// overflow). Uniform mode returns all ones. Throws DataError when every
/// group norm is zero in astro mode.
AlphaVector compute_alpha(const DenseMatrix& x, const GroupScheme& scheme,
                          RegMode mode);

/// Euclidean projection onto the L1 ball of the given radius, by descending
/// sort, cumulative sums and soft-thresholding; O(g log g). Returns v
/// unchanged when it is already inside the ball.
std::vector<double> project_l1_ball(std::span<const double> v, double radius);

/// Proximal operator of tau * ||.||_inf via Moreau decomposition:
/// w = v - tau * proj_B1(v / tau). tau = 0 returns v; ||v||_1 <= tau returns
/// the exact zero vector.
std::vector<double> prox_linf(std::span<const double> v, double tau);

/// Per-column proximal gradient descent on
///   J(w) = 1/2 ||X w - X w_orig||^2 + beta * sum_k alpha_k ||w^(k)||_inf
/// starting from w_orig, with step eta = step_size_scale / lam and the
/// group-wise prox using tau_k = eta * beta * alpha_k. `gram` must be X^T X
/// and `lam` its largest eigenvalue, both precomputed and shared across
/// columns. X^T y is formed as gram * w_orig.
ColumnResult pgd_reconstruct_column(const DenseMatrix& x,
                                    std::span<const double> w_orig,
                                    const AlphaVector& alpha,
                                    const GroupScheme& scheme,
                                    const RegConfig& cfg,
                                    const DenseMatrix& gram_matrix,
                                    double lam);

/// Reconstructs every output channel independently. Computes the Gram
/// matrix, lambda_max and alpha once per layer. Column errors are rethrown
/// with the column index attached.
LayerResult reconstruct_layer(const DenseMatrix& x, const DenseMatrix& weights,
                              const GroupScheme& scheme, const RegConfig& cfg);

} // namespace astroq
