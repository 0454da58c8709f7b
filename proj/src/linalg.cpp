#include "dgm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "dgm/errors.hpp"

namespace dgm {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows * cols)
        throw DimensionMismatch("DenseMatrix: entry count does not match shape");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionMismatch("DenseMatrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return DenseMatrix(r, c, std::move(data));
}

bool DenseMatrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

LowerTriangular LowerTriangular::from_dense(const DenseMatrix& m) {
    if (m.rows() != m.cols()) throw DimensionMismatch("LowerTriangular: matrix not square");
    const std::size_t n = m.rows();
    LowerTriangular l(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j > i && m(i, j) != 0.0)
                throw std::invalid_argument("LowerTriangular: nonzero above diagonal");
            l(i, j) = m(i, j);
        }
        if (!(m(i, i) > 0.0)) throw std::invalid_argument("LowerTriangular: non-positive diagonal");
    }
    return l;
}

LowerTriangular LowerTriangular::identity(std::size_t n) {
    LowerTriangular l(n);
    for (std::size_t i = 0; i < n; ++i) l(i, i) = 1.0;
    return l;
}

double LowerTriangular::log_diag_sum() const {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += std::log((*this)(i, i));
    return s;
}

DenseMatrix LowerTriangular::reconstruct() const {
    DenseMatrix a(dim_, dim_);
    for (std::size_t i = 0; i < dim_; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k <= j; ++k) s += (*this)(i, k) * (*this)(j, k);
            a(i, j) = s;
            a(j, i) = s;
        }
    return a;
}

namespace {

std::optional<LowerTriangular> try_cholesky(const DenseMatrix& a, double shift) {
    const std::size_t n = a.rows();
    LowerTriangular l(n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j) + shift;
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) return std::nullopt;
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

}  // namespace

LowerTriangular cholesky(const DenseMatrix& a) {
    if (a.rows() != a.cols()) throw DimensionMismatch("cholesky: matrix not square");
    if (a.rows() == 0) throw DimensionMismatch("cholesky: empty matrix");
    const std::size_t n = a.rows();

    double scale = 0.0;
    for (double x : a.entries()) scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (std::abs(a(i, j) - a(j, i)) > 1e-12 * scale)
                throw std::invalid_argument("cholesky: matrix not symmetric");

    if (auto l = try_cholesky(a, 0.0)) return *std::move(l);

    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) trace += a(i, i);
    const double jitter = 1e-10 * trace / static_cast<double>(n);
    if (jitter > 0.0)
        if (auto l = try_cholesky(a, jitter)) return *std::move(l);
    throw NotPositiveDefinite("cholesky: matrix is not positive definite (jitter retry failed)");
}

Vector solve_triangular(const LowerTriangular& l, std::span<const double> b, bool transposed) {
    const std::size_t n = l.dim();
    if (b.size() != n) throw DimensionMismatch("solve_triangular: dimension mismatch");
    Vector x(b.begin(), b.end());
    if (!transposed) {
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = (x[i] - dot(l.row_before_diagonal(i), std::span<const double>(x.data(), i))) / l(i, i);
        }
    } else {
        // Column sweep so that L is read row by row.
        for (std::size_t i = n; i-- > 0;) {
            x[i] /= l(i, i);
            const double xi = x[i];
            for (std::size_t k = 0; k < i; ++k) x[k] -= l(i, k) * xi;
        }
    }
    return x;
}

DenseMatrix solve_triangular(const LowerTriangular& l, const DenseMatrix& b, bool transposed) {
    const std::size_t n = l.dim();
    const std::size_t m = b.cols();
    if (b.rows() != n) throw DimensionMismatch("solve_triangular: dimension mismatch");
    DenseMatrix x = b;
    if (!transposed) {
        // fill[i]: one past the last column where row i of x can be nonzero,
        // so lower-triangular right-hand sides cost about half.
        std::vector<std::size_t> fill(n, 0);
        for (std::size_t i = 0; i < n; ++i) {
            double* xi = &x(i, 0);
            std::size_t f = m;
            while (f > 0 && xi[f - 1] == 0.0) --f;
            for (std::size_t k = 0; k < i; ++k) {
                const double lik = l(i, k);
                if (lik == 0.0) continue;
                const double* xk = &x(k, 0);
                for (std::size_t j = 0; j < fill[k]; ++j) xi[j] -= lik * xk[j];
                f = std::max(f, fill[k]);
            }
            const double inv = 1.0 / l(i, i);
            for (std::size_t j = 0; j < f; ++j) xi[j] *= inv;
            fill[i] = f;
        }
    } else {
        for (std::size_t i = n; i-- > 0;) {
            double* xi = &x(i, 0);
            const double inv = 1.0 / l(i, i);
            for (std::size_t j = 0; j < m; ++j) xi[j] *= inv;
            for (std::size_t k = 0; k < i; ++k) {
                const double lik = l(i, k);
                if (lik == 0.0) continue;
                double* xk = &x(k, 0);
                for (std::size_t j = 0; j < m; ++j) xk[j] -= lik * xi[j];
            }
        }
    }
    return x;
}

LowerTriangular chol_rank1_update(LowerTriangular l, std::span<const double> v) {
    const std::size_t n = l.dim();
    if (v.size() != n) throw DimensionMismatch("chol_rank1_update: dimension mismatch");
    Vector w(v.begin(), v.end());
    for (std::size_t k = 0; k < n; ++k) {
        if (w[k] == 0.0) continue;
        const double lkk = l(k, k);
        const double r = std::hypot(lkk, w[k]);
        const double c = r / lkk;
        const double s = w[k] / lkk;
        l(k, k) = r;
        for (std::size_t i = k + 1; i < n; ++i) {
            l(i, k) = (l(i, k) + s * w[i]) / c;
            w[i] = c * w[i] - s * l(i, k);
        }
    }
    return l;
}

DenseMatrix gram(const DenseMatrix& j) {
    const std::size_t n = j.rows();
    DenseMatrix g(n, n);
    for (std::size_t a = 0; a < n; ++a) {
        const auto ra = j.row(a);
        for (std::size_t b = 0; b <= a; ++b) {
            const double s = dot(ra, j.row(b));
            g(a, b) = s;
            g(b, a) = s;
        }
    }
    return g;
}

Vector solve_lu(DenseMatrix a, std::span<const double> b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw DimensionMismatch("solve_lu: dimension mismatch");
    Vector x(b.begin(), b.end());
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (a(piv, k) == 0.0 || !std::isfinite(a(piv, k)))
            throw NotPositiveDefinite("solve_lu: singular matrix");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(x[k], x[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double f = a(i, k) / a(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
            x[i] -= f * x[k];
        }
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double s = x[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * x[j];
        x[ii] = s / a(ii, ii);
    }
    return x;
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
    if (x.size() != a.cols()) throw DimensionMismatch("matvec: dimension mismatch");
    Vector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

Vector matvec_transposed(const DenseMatrix& a, std::span<const double> y) {
    if (y.size() != a.rows()) throw DimensionMismatch("matvec_transposed: dimension mismatch");
    Vector x(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double yi = y[i];
        if (yi == 0.0) continue;
        const auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) x[j] += r[j] * yi;
    }
    return x;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matmul: dimension mismatch");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("dot: dimension mismatch");
    // Four independent partial sums let the compiler vectorize without
    // reassociating; the summation order is still fixed.
    double p[4] = {0.0, 0.0, 0.0, 0.0};
    const std::size_t n = a.size();
    const std::size_t blocked = n - n % 4;
    for (std::size_t i = 0; i < blocked; i += 4)
        for (std::size_t k = 0; k < 4; ++k) p[k] += a[i + k] * b[i + k];
    double s = (p[0] + p[1]) + (p[2] + p[3]);
    for (std::size_t i = blocked; i < n; ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) {
        if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
        m = std::max(m, std::abs(x));
    }
    return m;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("max_abs_diff: dimension mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = std::abs(a[i] - b[i]);
        if (!std::isfinite(d)) return std::numeric_limits<double>::infinity();
        m = std::max(m, d);
    }
    return m;
}

}  // namespace dgm
