// SPDX-License-Identifier: Apache-2.0
#include "astroq/reg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "astroq/analysis.hpp"
#include "astroq/errors.hpp"

namespace astroq {

AlphaVector compute_alpha(const DenseMatrix& x, const GroupScheme& scheme,
                          RegMode mode) {
    if (x.cols() != scheme.c_in) {
        throw std::invalid_argument("compute_alpha: activation columns (" +
                                    std::to_string(x.cols()) +
                                    ") do not match the group scheme (" +
                                    std::to_string(scheme.c_in) + ")");
    }
    AlphaVector alpha;
    if (mode == RegMode::uniform) {
        alpha.values.assign(scheme.num_groups, 1.0);
        return alpha;
    }

    const std::vector<double> norms = group_activation_norms(x, scheme);
    const double nmax = *std::max_element(norms.begin(), norms.end());
    if (nmax == 0.0) {
        throw DataError("compute_alpha: degenerate calibration data, "
                        "all group activation norms are zero");
    }
    // Work with ratios to the largest norm: the common scale of X cancels
    // before any further rounding.
    std::vector<double> ratios(norms.size());
    for (std::size_t k = 0; k < norms.size(); ++k) {
        ratios[k] = norms[k] / nmax;
    }
    double mean = 0.0;
    for (double r : ratios) {
        mean += r;
    }
    mean /= static_cast<double>(ratios.size());
    alpha.values.resize(ratios.size());
    for (std::size_t k = 0; k < ratios.size(); ++k) {
        alpha.values[k] = ratios[k] / mean;
    }
    return alpha;
}

std::vector<double> project_l1_ball(std::span<const double> v, double radius) {
    if (!(radius > 0.0)) {
        throw std::invalid_argument("project_l1_ball: radius must be positive");
    }
    double l1 = 0.0;
    for (double x : v) {
        l1 += std::fabs(x);
    }
    std::vector<double> w(v.begin(), v.end());
    if (l1 <= radius) {
        return w;
    }

    std::vector<double> u(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        u[i] = std::fabs(v[i]);
    }
    std::sort(u.begin(), u.end(), std::greater<double>());

    double cum = 0.0;
    double theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        const double candidate = (cum - radius) / static_cast<double>(j + 1);
        if (u[j] - candidate > 0.0) {
            theta = candidate; // rho = j + 1
        }
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double mag = std::fabs(v[i]) - theta;
        w[i] = (mag > 0.0) ? std::copysign(mag, v[i]) : 0.0;
    }
    return w;
}

std::vector<double> prox_linf(std::span<const double> v, double tau) {
    if (tau < 0.0) {
        throw std::invalid_argument("prox_linf: tau must be non-negative");
    }
    if (tau == 0.0) {
        return {v.begin(), v.end()};
    }
    double l1 = 0.0;
    for (double x : v) {
        l1 += std::fabs(x);
    }
    if (l1 <= tau) {
        return std::vector<double>(v.size(), 0.0); // full shrinkage
    }
    std::vector<double> scaled(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        scaled[i] = v[i] / tau;
    }
    const std::vector<double> p = project_l1_ball(scaled, 1.0);
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        w[i] = v[i] - tau * p[i];
    }
    return w;
}

ColumnResult pgd_reconstruct_column(const DenseMatrix& x,
                                    std::span<const double> w_orig,
                                    const AlphaVector& alpha,
                                    const GroupScheme& scheme,
                                    const RegConfig& cfg,
                                    const DenseMatrix& gram_matrix,
                                    double lam) {
    if (!(lam > 0.0)) {
        throw std::invalid_argument("pgd_reconstruct_column: lambda_max must be positive");
    }
    if (cfg.iters == 0) {
        throw std::invalid_argument("pgd_reconstruct_column: iteration count must be >= 1");
    }
    if (cfg.beta < 0.0 || !(cfg.step_size_scale > 0.0) || cfg.step_size_scale > 1.0) {
        throw std::invalid_argument("pgd_reconstruct_column: invalid RegConfig");
    }
    const std::size_t n = scheme.c_in;
    if (w_orig.size() != n || gram_matrix.rows() != n ||
        gram_matrix.cols() != n || x.cols() != n ||
        alpha.values.size() != scheme.num_groups) {
        throw std::invalid_argument("pgd_reconstruct_column: shape mismatch");
    }

    const double eta = cfg.step_size_scale / lam;
    // X^T y with y = X w_orig; formed from the shared Gram matrix so the
    // gradient is exactly zero at w_orig when beta = 0.
    const std::vector<double> xty = matvec(gram_matrix, w_orig);

    ColumnResult result;
    result.weights.assign(w_orig.begin(), w_orig.end());
    std::vector<double>& w = result.weights;

    result.trace.objective_values.reserve(cfg.iters + 1);
    result.trace.objective_values.push_back(
        objective_value(x, w, w_orig, alpha, scheme, cfg.beta));

    std::vector<double> v(n);
    for (std::size_t t = 1; t <= cfg.iters; ++t) {
        const std::vector<double> gw = matvec(gram_matrix, w);
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = w[i] - eta * (gw[i] - xty[i]);
        }
        for (std::size_t k = 0; k < scheme.num_groups; ++k) {
            const double tau = eta * cfg.beta * alpha.values[k];
            const std::span<const double> group(v.data() + scheme.group_begin(k),
                                                scheme.group_size);
            const std::vector<double> prox = prox_linf(group, tau);
            std::copy(prox.begin(), prox.end(),
                      w.begin() + static_cast<std::ptrdiff_t>(scheme.group_begin(k)));
        }
        const double obj = objective_value(x, w, w_orig, alpha, scheme, cfg.beta);
        if (!std::isfinite(obj)) {
            throw NumericError("pgd_reconstruct_column: non-finite objective at iteration " +
                               std::to_string(t));
        }
        result.trace.objective_values.push_back(obj);
    }

    const std::vector<double> gw = matvec(gram_matrix, w);
    double grad_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = gw[i] - xty[i];
        grad_sq += gi * gi;
    }
    result.trace.final_grad_norm = std::sqrt(grad_sq);
    return result;
}

LayerResult reconstruct_layer(const DenseMatrix& x, const DenseMatrix& weights,
                              const GroupScheme& scheme, const RegConfig& cfg) {
    if (weights.rows() != scheme.c_in || x.cols() != scheme.c_in) {
        throw std::invalid_argument("reconstruct_layer: shape mismatch");
    }
    const DenseMatrix g = gram(x);
    // generous budget: clustered top eigenvalues converge slowly
    const SpectralEstimate est = lambda_max(g, 1e-8, 10000);
    if (!est.converged(1e-8)) {
        throw NumericError("reconstruct_layer: power iteration did not converge "
                           "(residual " + std::to_string(est.residual) + ")");
    }
    if (!(est.lambda_max > 0.0)) {
        throw DataError("reconstruct_layer: calibration activations are all zero");
    }
    const AlphaVector alpha = compute_alpha(x, scheme, cfg.mode);

    LayerResult result;
    result.weights = DenseMatrix(weights.rows(), weights.cols());
    result.traces.reserve(weights.cols());
    for (std::size_t j = 0; j < weights.cols(); ++j) {
        try {
            const std::vector<double> col = weights.column(j);
            ColumnResult cr = pgd_reconstruct_column(x, col, alpha, scheme, cfg,
                                                     g, est.lambda_max);
            result.weights.set_column(j, cr.weights);
            result.traces.push_back(std::move(cr.trace));
        } catch (const NumericError& e) {
            throw NumericError("column " + std::to_string(j) + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("column " + std::to_string(j) + ": " +
                                        e.what());
        }
    }
    return result;
}

} // namespace astroq
