// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace astroq {

/// Hard cap on elements of any single matrix product/Gram allocation.
inline constexpr std::size_t kMaxElements = std::size_t{1} << 27;

/// Dense row-major matrix of doubles. All internal arithmetic is 64-bit;
/// 32-bit precision only appears at the container (disk) boundary.
class DenseMatrix {
public:
    DenseMatrix() = default;

    /// Zero-initialized rows x cols matrix.
    DenseMatrix(std::size_t rows, std::size_t cols);

    /// Takes ownership of row-major data; throws if the length does not
    /// equal rows * cols.
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double operator()(std::size_t i, std::size_t j) const {
        return data_[i * cols_ + j];
    }
    double& operator()(std::size_t i, std::size_t j) {
        return data_[i * cols_ + j];
    }

    std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols_, cols_};
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    std::vector<double> column(std::size_t j) const;
    void set_column(std::size_t j, std::span<const double> v);

    bool all_finite() const;

    /// Throws DataError when any entry is NaN/Inf. `what` names the tensor
    /// in the error message.
    void require_finite(const std::string& what) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Result of the dominant-eigenvalue power iteration. `residual` is the
/// relative residual norm ||G v - lambda v|| / |lambda| of the returned pair;
/// it is <= the requested tolerance iff the iteration converged.
struct SpectralEstimate {
    double lambda_max = 0.0;
    std::size_t iterations_used = 0;
    double residual = 0.0;

    bool converged(double tol) const { return residual <= tol; }
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> v);

/// X^T X, symmetrized by averaging with its transpose. Throws SizingError
/// when the input or the result would exceed kMaxElements.
DenseMatrix gram(const DenseMatrix& x);

double frobenius_norm(const DenseMatrix& a);
double norm2(std::span<const double> v);

/// Frobenius norm of (a - b); shapes must match.
double frobenius_diff(const DenseMatrix& a, const DenseMatrix& b);

/// Largest eigenvalue of a symmetric PSD matrix by power iteration from the
/// normalized all-ones vector. Deterministic. If the start vector is
/// (numerically) orthogonal to the dominant eigenvector, the first component
/// is perturbed by 1e-6 and the iteration restarts once. A result with
/// residual > tol means non-convergence; the caller decides whether that is
/// fatal.
SpectralEstimate lambda_max(const DenseMatrix& g, double tol = 1e-8,
                            std::size_t max_iters = 1000);

} // namespace astroq
