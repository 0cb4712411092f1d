// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "astroq/matrix.hpp"
#include "astroq/quant.hpp"

namespace astroq {

/// Damped layer Hessian approximation H = 2 X^T X + damping * mean(diag) * I.
struct HessianState {
    DenseMatrix h;
    double damping_ratio = 0.01;
};

HessianState build_hessian(const DenseMatrix& x, double damping_ratio = 0.01);

/// Hessian-compensated layer quantization. Input rows are quantized in
/// natural index order; after quantizing row i, the rounding error is
/// distributed to the remaining rows through the upper Cholesky factor of
/// H^{-1}. Group scales are frozen from the current (error-compensated)
/// weights when the group is entered. With a diagonal Hessian the output is
/// bit-identical to rtn_quantize. Throws NumericError when the damped
/// Hessian is not positive definite.
QuantizedLayer gptq_quantize(const DenseMatrix& weights, const DenseMatrix& x,
                             const QuantConfig& cfg,
                             double damping_ratio = 0.01);

} // namespace astroq
