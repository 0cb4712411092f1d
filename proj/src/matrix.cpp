// SPDX-License-Identifier: Apache-2.0
#include "astroq/matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "astroq/errors.hpp"

namespace astroq {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument(
            "DenseMatrix: data length " + std::to_string(data_.size()) +
            " does not equal rows*cols = " + std::to_string(rows_ * cols_));
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

std::vector<double> DenseMatrix::column(std::size_t j) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        out[i] = (*this)(i, j);
    }
    return out;
}

void DenseMatrix::set_column(std::size_t j, std::span<const double> v) {
    for (std::size_t i = 0; i < rows_; ++i) {
        (*this)(i, j) = v[i];
    }
}

bool DenseMatrix::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

void DenseMatrix::require_finite(const std::string& what) const {
    if (!all_finite()) {
        throw DataError(what + ": non-finite entry");
    }
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw std::invalid_argument("matmul: inner dimensions differ (" +
                                    std::to_string(a.cols()) + " vs " +
                                    std::to_string(b.rows()) + ")");
    }
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < b.cols(); ++j) {
                c(i, j) += aik * b(k, j);
            }
        }
    }
    return c;
}

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> v) {
    if (a.cols() != v.size()) {
        throw std::invalid_argument("matvec: dimension mismatch");
    }
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double acc = 0.0;
        const auto row = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) {
            acc += row[j] * v[j];
        }
        out[i] = acc;
    }
    return out;
}

DenseMatrix gram(const DenseMatrix& x) {
    if (x.empty()) {
        throw std::invalid_argument("gram: empty matrix");
    }
    const std::size_t n = x.rows();
    const std::size_t c = x.cols();
    if (n * c > kMaxElements || c * c > kMaxElements) {
        throw SizingError("gram: " + std::to_string(n) + "x" +
                          std::to_string(c) +
                          " input exceeds the element budget");
    }
    DenseMatrix g(c, c);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = x.row(i);
        for (std::size_t a = 0; a < c; ++a) {
            const double xa = row[a];
            if (xa == 0.0) {
                continue;
            }
            for (std::size_t b = 0; b < c; ++b) {
                g(a, b) += xa * row[b];
            }
        }
    }
    // Symmetrize: roundoff in the accumulation order can differ across the
    // diagonal.
    for (std::size_t a = 0; a < c; ++a) {
        for (std::size_t b = a + 1; b < c; ++b) {
            const double avg = 0.5 * (g(a, b) + g(b, a));
            g(a, b) = avg;
            g(b, a) = avg;
        }
    }
    return g;
}

double frobenius_norm(const DenseMatrix& a) {
    double acc = 0.0;
    for (double x : a.data()) {
        acc += x * x;
    }
    return std::sqrt(acc);
}

double norm2(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x * x;
    }
    return std::sqrt(acc);
}

double frobenius_diff(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("frobenius_diff: shape mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) {
        const double d = a.data()[i] - b.data()[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

namespace {

double max_abs(const DenseMatrix& m) {
    double out = 0.0;
    for (double x : m.data()) {
        out = std::max(out, std::fabs(x));
    }
    return out;
}

struct PowerRun {
    double lambda = 0.0;
    std::size_t iterations = 0;
    double residual = 0.0;
    bool degenerate = false; // G v vanished while G != 0
};

PowerRun run_power(const DenseMatrix& g, std::vector<double> v, double tol,
                   std::size_t max_iters, bool g_is_zero) {
    PowerRun run;
    const std::size_t n = g.rows();
    for (std::size_t it = 1; it <= max_iters; ++it) {
        run.iterations = it;
        const std::vector<double> w = matvec(g, v);
        double lam = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            lam += v[i] * w[i];
        }
        double res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = w[i] - lam * v[i];
            res += r * r;
        }
        res = std::sqrt(res);
        const double denom = std::fabs(lam);
        run.lambda = lam;
        if (denom > 0.0) {
            run.residual = res / denom;
        } else {
            run.residual = (res > 0.0) ? 1.0 : 0.0;
        }
        if (run.residual <= tol) {
            if (denom == 0.0 && !g_is_zero) {
                run.degenerate = true; // start vector in the null space
            }
            return run;
        }
        const double nw = norm2(w);
        if (nw == 0.0) {
            run.degenerate = !g_is_zero;
            run.lambda = 0.0;
            run.residual = g_is_zero ? 0.0 : 1.0;
            return run;
        }
        for (std::size_t i = 0; i < n; ++i) {
            v[i] = w[i] / nw;
        }
    }
    return run;
}

} // namespace

SpectralEstimate lambda_max(const DenseMatrix& g, double tol,
                            std::size_t max_iters) {
    if (g.rows() != g.cols() || g.empty()) {
        throw std::invalid_argument("lambda_max: matrix must be square and non-empty");
    }
    if (tol <= 0.0 || max_iters == 0) {
        throw std::invalid_argument("lambda_max: tol and max_iters must be positive");
    }
    const std::size_t n = g.rows();
    const double scale = max_abs(g);
    double asym = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
            asym = std::max(asym, std::fabs(g(a, b) - g(b, a)));
        }
    }
    if (scale > 0.0 && asym > 1e-9 * scale) {
        throw std::invalid_argument("lambda_max: matrix is not symmetric");
    }

    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<double> v(n, inv_sqrt_n);
    PowerRun run = run_power(g, v, tol, max_iters, scale == 0.0);

    if (run.degenerate || run.residual > tol) {
        // All-ones start can be orthogonal to the dominant eigenvector;
        // perturb the first component and retry once.
        std::vector<double> v2(n, inv_sqrt_n);
        v2[0] += 1e-6;
        const double nv = norm2(v2);
        for (double& e : v2) {
            e /= nv;
        }
        PowerRun retry = run_power(g, std::move(v2), tol, max_iters, scale == 0.0);
        retry.iterations += run.iterations;
        run = retry;
    }

    SpectralEstimate est;
    est.lambda_max = run.lambda;
    est.iterations_used = run.iterations;
    est.residual = run.residual;
    return est;
}

} // namespace astroq
