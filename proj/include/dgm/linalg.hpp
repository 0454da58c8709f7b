#pragma once

// Dense kernels for the constraint Jacobian J and the Cholesky factor of its
// Gram matrix J*J^T. Everything is row-major and small (a few hundred rows at
// most), so no blocking or sparse formats.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dgm {

using Vector = std::vector<double>;

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    const std::vector<double>& entries() const noexcept { return data_; }
    bool all_finite() const;
    DenseMatrix transposed() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Lower-triangular Cholesky factor. The strictly upper triangle is kept as
// explicit zeros so the storage doubles as a DenseMatrix view.
class LowerTriangular {
public:
    LowerTriangular() = default;
    explicit LowerTriangular(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0) {}

    // Throws std::invalid_argument unless `m` is square, lower-triangular with
    // a strictly positive diagonal.
    static LowerTriangular from_dense(const DenseMatrix& m);
    static LowerTriangular identity(std::size_t n);

    std::size_t dim() const noexcept { return dim_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * dim_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }
    // Entries (i, 0..i-1), left of the diagonal.
    std::span<const double> row_before_diagonal(std::size_t i) const { return {data_.data() + i * dim_, i}; }

    double log_diag_sum() const;
    DenseMatrix to_dense() const { return DenseMatrix(dim_, dim_, data_); }
    // L * L^T
    DenseMatrix reconstruct() const;

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

// Factorizes a symmetric positive-definite matrix. On a non-positive pivot the
// diagonal is shifted once by 1e-10 * trace / n and the factorization retried;
// a second failure throws NotPositiveDefinite.
LowerTriangular cholesky(const DenseMatrix& a);

// Solves L x = b, or L^T x = b when `transposed` is set.
Vector solve_triangular(const LowerTriangular& l, std::span<const double> b, bool transposed);
// Same for every column of B at once.
DenseMatrix solve_triangular(const LowerTriangular& l, const DenseMatrix& b, bool transposed);

// Returns the factor of L L^T + v v^T (O(n^2), no refactorization).
LowerTriangular chol_rank1_update(LowerTriangular l, std::span<const double> v);

// J * J^T, symmetric by construction.
DenseMatrix gram(const DenseMatrix& j);

// Solves A x = b by LU with partial pivoting. Throws NotPositiveDefinite on an
// exactly singular pivot (used only by the fallback root finder).
Vector solve_lu(DenseMatrix a, std::span<const double> b);

Vector matvec(const DenseMatrix& a, std::span<const double> x);
// A^T y
Vector matvec_transposed(const DenseMatrix& a, std::span<const double> y);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double max_abs(std::span<const double> a);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace dgm
