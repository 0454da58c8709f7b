#include <doctest.h>

#include <cmath>

#include "dgm/errors.hpp"
#include "dgm/linalg.hpp"
#include "dgm/random.hpp"

using namespace dgm;

namespace {

DenseMatrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    DenseMatrix m(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

double max_abs_entry(const DenseMatrix& a) { return max_abs(a.entries()); }

double max_diff(const DenseMatrix& a, const DenseMatrix& b) { return max_abs_diff(a.entries(), b.entries()); }

}  // namespace

TEST_CASE("cholesky of identity is identity") {
    const LowerTriangular l = cholesky(DenseMatrix::identity(3));
    CHECK(max_diff(l.to_dense(), DenseMatrix::identity(3)) == 0.0);
}

TEST_CASE("cholesky of a hand-factored 2x2") {
    const LowerTriangular l = cholesky(DenseMatrix::from_rows({{4, 2}, {2, 3}}));
    CHECK(l(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(l(0, 1) == 0.0);
    CHECK(l(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(l(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("cholesky reconstructs random Gram matrices") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseMatrix m = gram(random_matrix(rng, 8, 10));
        const LowerTriangular l = cholesky(m);
        CHECK(max_diff(l.reconstruct(), m) <= 1e-10 * max_abs_entry(m));
        for (std::size_t i = 0; i < 8; ++i) {
            CHECK(l(i, i) > 0.0);
            for (std::size_t j = i + 1; j < 8; ++j) CHECK(l(i, j) == 0.0);
        }
    }
}

TEST_CASE("cholesky rejects asymmetric and indefinite input") {
    CHECK_THROWS_AS(cholesky(DenseMatrix::from_rows({{1, 0.5}, {0.4, 1}})), std::invalid_argument);
    CHECK_THROWS_AS(cholesky(DenseMatrix::from_rows({{1, 2}, {2, 1}})), NotPositiveDefinite);
    CHECK_THROWS_AS(cholesky(DenseMatrix::from_rows({{0, 0}, {0, 0}})), NotPositiveDefinite);
}

TEST_CASE("cholesky jitter retry rescues a rank-deficient Gram matrix") {
    // Rank one up to rounding: the first factorization hits a zero pivot.
    const DenseMatrix m = DenseMatrix::from_rows({{1, 1}, {1, 1}});
    const LowerTriangular l = cholesky(m);
    CHECK(l(1, 1) > 0.0);
    CHECK(max_diff(l.reconstruct(), m) <= 1e-9);
}

TEST_CASE("solve_triangular forward and transposed") {
    const Vector x = solve_triangular(LowerTriangular::identity(3), Vector{1, 2, 3}, false);
    CHECK(x == Vector{1, 2, 3});

    const LowerTriangular l = LowerTriangular::from_dense(DenseMatrix::from_rows({{2, 0}, {1, std::sqrt(2.0)}}));
    const Vector y = solve_triangular(l, Vector{2, 1 + std::sqrt(2.0)}, false);
    CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-15));

    Rng rng(5);
    const LowerTriangular r = cholesky(gram(random_matrix(rng, 6, 9)));
    const Vector b = rng.normal_vector(6);
    const Vector xf = solve_triangular(r, b, false);
    const Vector xt = solve_triangular(r, b, true);
    const DenseMatrix rd = r.to_dense();
    CHECK(max_abs_diff(matvec(rd, xf), b) <= 1e-12 * (1 + max_abs(b)));
    CHECK(max_abs_diff(matvec_transposed(rd, xt), b) <= 1e-12 * (1 + max_abs(b)));
    CHECK_THROWS_AS(solve_triangular(r, Vector{1, 2}, false), DimensionMismatch);
}

TEST_CASE("chol_rank1_update") {
    const LowerTriangular l = chol_rank1_update(LowerTriangular::identity(2), Vector{1, 0});
    CHECK(l(0, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(l(1, 0) == 0.0);
    CHECK(l(1, 1) == doctest::Approx(1.0).epsilon(1e-15));

    Rng rng(3);
    const LowerTriangular base = cholesky(gram(random_matrix(rng, 5, 7)));
    const LowerTriangular same = chol_rank1_update(base, Vector(5, 0.0));
    CHECK(max_diff(same.to_dense(), base.to_dense()) == 0.0);

    for (int trial = 0; trial < 20; ++trial) {
        const LowerTriangular f = cholesky(gram(random_matrix(rng, 7, 9)));
        const Vector v = rng.normal_vector(7);
        DenseMatrix target = f.reconstruct();
        for (std::size_t i = 0; i < 7; ++i)
            for (std::size_t j = 0; j < 7; ++j) target(i, j) += v[i] * v[j];
        const LowerTriangular dense = cholesky(target);
        const LowerTriangular updated = chol_rank1_update(f, v);
        CHECK(max_diff(updated.to_dense(), dense.to_dense()) <= 1e-10 * max_abs_entry(target));
    }
    CHECK_THROWS_AS(chol_rank1_update(LowerTriangular::identity(2), Vector{1, 2, 3}), DimensionMismatch);
}

TEST_CASE("gram is exactly symmetric") {
    Rng rng(9);
    const DenseMatrix g = gram(random_matrix(rng, 6, 11));
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) CHECK(g(i, j) == g(j, i));
    const DenseMatrix one = gram(DenseMatrix::from_rows({{1, 2, 3}}));
    CHECK(one(0, 0) == 14.0);
}

TEST_CASE("solve_lu") {
    const DenseMatrix a = DenseMatrix::from_rows({{0, 2}, {3, 1}});
    const Vector x = solve_lu(a, Vector{4, 5});
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(2.0));
    CHECK_THROWS_AS(solve_lu(DenseMatrix::from_rows({{1, 2}, {2, 4}}), Vector{1, 1}), NotPositiveDefinite);
}

TEST_CASE("LowerTriangular validation") {
    CHECK_THROWS_AS(LowerTriangular::from_dense(DenseMatrix::from_rows({{1, 1}, {0, 1}})), std::invalid_argument);
    CHECK_THROWS_AS(LowerTriangular::from_dense(DenseMatrix::from_rows({{-1, 0}, {0, 1}})), std::invalid_argument);
    const LowerTriangular l = LowerTriangular::from_dense(DenseMatrix::from_rows({{2, 0}, {1, 3}}));
    CHECK(l.log_diag_sum() == doctest::Approx(std::log(6.0)));
}
