// SPDX-License-Identifier: Apache-2.0
#include "astroq/gptq.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "astroq/errors.hpp"

namespace astroq {

namespace {

// Lower Cholesky factor L with A = L L^T. Returns false on a non-positive
// pivot.
bool cholesky_lower(const DenseMatrix& a, DenseMatrix& l) {
    const std::size_t n = a.rows();
    l = DenseMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double acc = a(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                acc -= l(i, k) * l(j, k);
            }
            if (i == j) {
                if (!(acc > 0.0) || !std::isfinite(acc)) {
                    return false;
                }
                l(i, i) = std::sqrt(acc);
            } else {
                l(i, j) = acc / l(j, j);
            }
        }
    }
    return true;
}

// Upper factor U with A = U^T U. Returns false on a non-positive pivot.
bool cholesky_upper(const DenseMatrix& a, DenseMatrix& u) {
    const std::size_t n = a.rows();
    u = DenseMatrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        double diag = a(i, i);
        for (std::size_t k = 0; k < i; ++k) {
            diag -= u(k, i) * u(k, i);
        }
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            return false;
        }
        u(i, i) = std::sqrt(diag);
        for (std::size_t j = i + 1; j < n; ++j) {
            double acc = a(i, j);
            for (std::size_t k = 0; k < i; ++k) {
                acc -= u(k, i) * u(k, j);
            }
            u(i, j) = acc / u(i, i);
        }
    }
    return true;
}

// A^{-1} from the lower Cholesky factor: M = L^{-1} by forward substitution,
// then A^{-1} = M^T M.
DenseMatrix invert_from_cholesky(const DenseMatrix& l) {
    const std::size_t n = l.rows();
    DenseMatrix m(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t i = col; i < n; ++i) {
            double acc = (i == col) ? 1.0 : 0.0;
            for (std::size_t k = col; k < i; ++k) {
                acc -= l(i, k) * m(k, col);
            }
            m(i, col) = acc / l(i, i);
        }
    }
    DenseMatrix inv(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t k = std::max(i, j); k < n; ++k) {
                acc += m(k, i) * m(k, j);
            }
            inv(i, j) = acc;
            inv(j, i) = acc;
        }
    }
    return inv;
}

} // namespace

HessianState build_hessian(const DenseMatrix& x, double damping_ratio) {
    if (damping_ratio < 0.0) {
        throw std::invalid_argument("build_hessian: damping_ratio must be >= 0");
    }
    DenseMatrix h = gram(x);
    const std::size_t n = h.rows();
    for (double& v : h.data()) {
        v *= 2.0;
    }
    double mean_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mean_diag += h(i, i);
    }
    mean_diag /= static_cast<double>(n);
    const double damp = damping_ratio * mean_diag;
    for (std::size_t i = 0; i < n; ++i) {
        h(i, i) += damp;
    }
    return HessianState{std::move(h), damping_ratio};
}

QuantizedLayer gptq_quantize(const DenseMatrix& weights, const DenseMatrix& x,
                             const QuantConfig& cfg, double damping_ratio) {
    cfg.validate();
    const GroupScheme scheme = GroupScheme::create(weights.rows(), cfg.group_size);
    if (x.cols() != weights.rows()) {
        throw std::invalid_argument("gptq_quantize: activation columns (" +
                                    std::to_string(x.cols()) +
                                    ") do not match weight rows (" +
                                    std::to_string(weights.rows()) + ")");
    }

    const HessianState hess = build_hessian(x, damping_ratio);
    DenseMatrix l;
    if (!cholesky_lower(hess.h, l)) {
        throw NumericError("gptq_quantize: damped Hessian is not positive "
                           "definite; increase damping_ratio");
    }
    const DenseMatrix hinv = invert_from_cholesky(l);
    DenseMatrix u;
    if (!cholesky_upper(hinv, u)) {
        throw NumericError("gptq_quantize: inverse Hessian factorization "
                           "failed; increase damping_ratio");
    }

    const std::size_t c_in = weights.rows();
    const std::size_t c_out = weights.cols();
    const int qmax = cfg.qmax();
    const int qmin = cfg.qmin();

    DenseMatrix work = weights; // error-compensated weights
    QuantizedLayer q;
    q.config = cfg;
    q.codes = CodeMatrix(c_in, c_out);
    q.scales = DenseMatrix(scheme.num_groups, c_out);

    std::vector<double> buf(cfg.group_size);
    std::vector<double> err(c_out);
    for (std::size_t i = 0; i < c_in; ++i) {
        const std::size_t k = scheme.group_of(i);
        if (i % cfg.group_size == 0) {
            // Freeze the group scales from the compensated weights.
            for (std::size_t j = 0; j < c_out; ++j) {
                for (std::size_t r = 0; r < cfg.group_size; ++r) {
                    buf[r] = work(i + r, j);
                }
                q.scales(k, j) = group_scale(buf, cfg.bits);
            }
        }
        const double d = u(i, i);
        for (std::size_t j = 0; j < c_out; ++j) {
            const double w = work(i, j);
            const double s = q.scales(k, j);
            int code = 0;
            if (s != 0.0) {
                code = static_cast<int>(
                    std::clamp<long long>(std::llround(w / s), qmin, qmax));
            }
            q.codes(i, j) = static_cast<std::int8_t>(code);
            const double dq = static_cast<double>(code) * s;
            err[j] = (w - dq) / d;
        }
        for (std::size_t r = i + 1; r < c_in; ++r) {
            const double uir = u(i, r);
            if (uir == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < c_out; ++j) {
                work(r, j) -= uir * err[j];
            }
        }
    }
    return q;
}

} // namespace astroq
