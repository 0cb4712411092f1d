// SPDX-License-Identifier: Apache-2.0
#include "astroq/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace astroq {

std::vector<double> group_activation_norms(const DenseMatrix& x,
                                           const GroupScheme& scheme) {
    if (x.cols() != scheme.c_in) {
        throw std::invalid_argument("group_activation_norms: shape mismatch");
    }
    std::vector<double> norms(scheme.num_groups, 0.0);
    for (std::size_t k = 0; k < scheme.num_groups; ++k) {
        const std::size_t begin = scheme.group_begin(k);
        double acc = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t c = 0; c < scheme.group_size; ++c) {
                const double v = x(i, begin + c);
                acc += v * v;
            }
        }
        norms[k] = std::sqrt(acc);
    }
    return norms;
}

double error_bound(const DenseMatrix& x, const DenseMatrix& weights,
                   const GroupScheme& scheme, int bits) {
    if (weights.rows() != scheme.c_in || x.cols() != scheme.c_in) {
        throw std::invalid_argument("error_bound: shape mismatch");
    }
    const std::vector<double> xnorms = group_activation_norms(x, scheme);
    const double qmax = static_cast<double>((1 << (bits - 1)) - 1);
    const double prefactor =
        std::sqrt(static_cast<double>(scheme.group_size)) / (2.0 * qmax);

    double total = 0.0;
    for (std::size_t j = 0; j < weights.cols(); ++j) {
        for (std::size_t k = 0; k < scheme.num_groups; ++k) {
            const std::size_t begin = scheme.group_begin(k);
            double winf = 0.0;
            for (std::size_t r = 0; r < scheme.group_size; ++r) {
                winf = std::max(winf, std::fabs(weights(begin + r, j)));
            }
            total += xnorms[k] * winf;
        }
    }
    return prefactor * total;
}

double objective_value(const DenseMatrix& x, std::span<const double> w,
                       std::span<const double> w_orig,
                       const AlphaVector& alpha, const GroupScheme& scheme,
                       double beta) {
    if (w.size() != scheme.c_in || w_orig.size() != scheme.c_in ||
        x.cols() != scheme.c_in || alpha.values.size() != scheme.num_groups) {
        throw std::invalid_argument("objective_value: shape mismatch");
    }
    double residual_sq = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto row = x.row(i);
        double acc = 0.0;
        for (std::size_t c = 0; c < scheme.c_in; ++c) {
            acc += row[c] * (w[c] - w_orig[c]);
        }
        residual_sq += acc * acc;
    }
    double reg = 0.0;
    for (std::size_t k = 0; k < scheme.num_groups; ++k) {
        const std::size_t begin = scheme.group_begin(k);
        double winf = 0.0;
        for (std::size_t r = 0; r < scheme.group_size; ++r) {
            winf = std::max(winf, std::fabs(w[begin + r]));
        }
        reg += alpha.values[k] * winf;
    }
    return 0.5 * residual_sq + beta * reg;
}

LayerReport layer_report(const DenseMatrix& x, const DenseMatrix& w_orig,
                         const DenseMatrix& w_new, const QuantizedLayer& q,
                         const AlphaVector& alpha, const GroupScheme& scheme) {
    if (w_orig.rows() != scheme.c_in || w_new.rows() != scheme.c_in ||
        w_orig.cols() != w_new.cols() || x.cols() != scheme.c_in ||
        q.codes.rows != scheme.c_in || q.codes.cols != w_orig.cols() ||
        alpha.values.size() != scheme.num_groups) {
        throw std::invalid_argument("layer_report: shape mismatch");
    }

    LayerReport report;
    report.bits = q.config.bits;
    report.group_size = scheme.group_size;
    report.num_groups = scheme.num_groups;

    const DenseMatrix dq = dequantize(q);
    const DenseMatrix y_orig = matmul(x, w_orig);
    report.recon_error = frobenius_diff(y_orig, matmul(x, dq));
    report.bound = error_bound(x, w_new, scheme, q.config.bits);

    const double fid_num = frobenius_diff(matmul(x, w_new), y_orig);
    const double fid_den = frobenius_norm(y_orig);
    report.fidelity_ratio = (fid_den > 0.0) ? fid_num / fid_den : 0.0;

    const std::vector<double> xnorms = group_activation_norms(x, scheme);
    report.group_stats.resize(scheme.num_groups);
    for (std::size_t k = 0; k < scheme.num_groups; ++k) {
        GroupStat& gs = report.group_stats[k];
        gs.k = k;
        gs.activation_norm = xnorms[k];
        gs.alpha = alpha.values[k];
        const std::size_t begin = scheme.group_begin(k);
        double before = 0.0;
        double after = 0.0;
        for (std::size_t r = 0; r < scheme.group_size; ++r) {
            for (std::size_t j = 0; j < w_orig.cols(); ++j) {
                before = std::max(before, std::fabs(w_orig(begin + r, j)));
                after = std::max(after, std::fabs(w_new(begin + r, j)));
            }
        }
        gs.max_abs_before = before;
        gs.max_abs_after = after;
        gs.reduction_pct =
            (before > 0.0) ? 100.0 * (before - after) / before : 0.0;
    }
    std::stable_sort(report.group_stats.begin(), report.group_stats.end(),
                     [](const GroupStat& a, const GroupStat& b) {
                         return a.activation_norm > b.activation_norm;
                     });
    return report;
}

} // namespace astroq
