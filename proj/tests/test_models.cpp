#include <doctest.h>

#include <cmath>

#include "dgm/models.hpp"
#include "test_support.hpp"

using namespace dgm;

TEST_CASE("Lotka-Volterra first step with zero noise") {
    LotkaVolterraSpec spec;
    spec.n_steps = 3;
    const GeneratorModel m = lotka_volterra_model(spec);
    CHECK(m.input_dim == 10);
    CHECK(m.observed_dim == 6);
    const Vector u = lotka_volterra_inputs(spec, lotka_volterra_reference_params, Vector(6, 0.0));
    const Vector y = m.g_y(u);
    CHECK(y[0] == doctest::Approx(90.0).epsilon(1e-13));
    CHECK(y[1] == doctest::Approx(105.0).epsilon(1e-13));
    const Vector z = m.g_z(u);
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(z[i] == doctest::Approx(std::log(lotka_volterra_reference_params[i])).epsilon(1e-14));
}

TEST_CASE("Lotka-Volterra back-solve round trip") {
    LotkaVolterraSpec spec;
    spec.n_steps = 50;
    const GeneratorModel m = lotka_volterra_model(spec);
    Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector truth = lotka_volterra_inputs(spec, lotka_volterra_reference_params, rng.normal_vector(100));
        const Vector y = m.g_y(truth);
        Vector params = rng.normal_vector(4);
        for (double& p : params) p *= 0.2;
        for (std::size_t i = 0; i < 4; ++i) params[i] += truth[i];
        const Vector u = lotka_volterra_back_solve(spec, params, y);
        const Vector again = m.g_y(u);
        for (std::size_t k = 0; k < y.size(); ++k) CHECK(std::abs(again[k] - y[k]) <= 1e-12 * (1 + std::abs(y[k])));
        const Vector exact = lotka_volterra_back_solve(spec, Vector(truth.begin(), truth.begin() + 4), y);
        CHECK(max_abs_diff(exact, truth) <= 1e-10);
    }
}

TEST_CASE("Lotka-Volterra noise Jacobian block is unit lower-triangular") {
    LotkaVolterraSpec spec;
    spec.n_steps = 10;
    const GeneratorModel m = lotka_volterra_model(spec);
    Rng rng(8);
    const Vector u = testing::random_inputs({"lv", m, {}}, rng);
    const DenseMatrix j = jacobian(m.g_y, u);
    for (std::size_t k = 0; k < m.observed_dim; ++k) {
        CHECK(j(k, 4 + k) == 1.0);
        for (std::size_t c = k + 1; c < m.observed_dim; ++c) CHECK(j(k, 4 + c) == 0.0);
    }
}

TEST_CASE("Lotka-Volterra analytic Jacobian and contraction match the taped engines") {
    LotkaVolterraSpec spec;
    spec.n_steps = 12;
    LotkaVolterraSpec odd = spec;
    odd.dt_sim = 0.5;
    odd.prior_mu = -1.5;
    odd.prior_sigma = 0.7;
    odd.y0 = {80.0, 120.0};
    Rng rng(12);
    for (int trial = 0; trial < 10; ++trial) {
        const LotkaVolterraSpec& sp = trial % 2 ? odd : spec;
        const GeneratorModel m = lotka_volterra_model(sp);
        Vector u = rng.normal_vector(m.input_dim);
        for (std::size_t i = 0; i < 4; ++i)
            u[i] = 0.3 * u[i] + (std::log(lotka_volterra_reference_params[i]) - sp.prior_mu) / sp.prior_sigma;
        const DenseMatrix ja = jacobian(m.g_y, u);
        const DenseMatrix jr = jacobian(m.g_y, u, DiffMode::taped_reverse);
        const double scale = 1.0 + max_abs(jr.entries());
        CHECK(max_abs_diff(ja.entries(), jr.entries()) <= 1e-11 * scale);

        DenseMatrix w(m.observed_dim, m.input_dim);
        for (std::size_t r = 0; r < w.rows(); ++r)
            for (std::size_t c = 0; c < w.cols(); ++c) w(r, c) = rng.normal() * 1e-3;
        const Vector ra = second_contraction(m.g_y, u, w);
        const Vector rt = second_contraction_taped(m.g_y, u, w);
        CHECK(max_abs_diff(ra, rt) <= 1e-9 * (1.0 + max_abs(rt)));
    }
}

TEST_CASE("Lotka-Volterra spec validation") {
    LotkaVolterraSpec spec;
    spec.n_steps = 0;
    CHECK_THROWS_AS(lotka_volterra_model(spec), std::invalid_argument);
    spec.n_steps = 2;
    spec.dt_sim = 0.0;
    CHECK_THROWS_AS(lotka_volterra_model(spec), std::invalid_argument);
    spec.dt_sim = 1.0;
    spec.y0 = {-1.0, 1.0};
    CHECK_THROWS_AS(lotka_volterra_model(spec), std::invalid_argument);
}

TEST_CASE("linear_gaussian outputs") {
    const GeneratorModel m = linear_gaussian_model({1.0, 1.0, 1.0, 1.0});
    CHECK(m.g_y(Vector{1, 2, 3, 4})[0] == 10.0);
    CHECK(m.g_z(Vector{1, 2, 3, 4})[0] == 1.0);
    CHECK_THROWS_AS(linear_gaussian_model({0.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(linear_gaussian_model({}), std::invalid_argument);
}

TEST_CASE("circle Gram determinant is twice the radius on the manifold") {
    const GeneratorModel m = circle_model(1.5);
    const Observation obs{{2.25}, ""};
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Vector u = find_initial(m, obs, s);
        const ConstraintFactor f = constraint_jacobian(m, obs, u);
        CHECK(f.factor(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
    }
    CHECK(constraint(circle_model(1.0), {{1.0}, ""}, Vector{0.6, 0.8})[0] == doctest::Approx(0.0));
    CHECK_THROWS_AS(circle_model(0.0), std::invalid_argument);
}

TEST_CASE("toy1d outputs and quadrature posterior") {
    const GeneratorModel m = toy1d_model();
    CHECK(m.g_y(Vector{1.0, 0.0})[0] == 1.0);
    CHECK(m.g_z(Vector{1.0, 0.0})[0] == 1.0);
    CHECK(std::abs(toy1d_grid_posterior_mean(0.0)) <= 1e-14);
    // Independent 4096-point quadrature (mpmath, 50 digits) on [-6, 6].
    CHECK(toy1d_grid_posterior_mean(1.0) == doctest::Approx(0.6027037776942104).epsilon(1e-12));
    CHECK(toy1d_grid_posterior_mean(1.0, 1.0) == doctest::Approx(0.232978454626064).epsilon(1e-9));
    CHECK(toy1d_grid_posterior_mean(1.0, 0.1) == doctest::Approx(0.588185902331151).epsilon(1e-9));
}

TEST_CASE("bundled models: Jacobians match central differences at 20 points") {
    for (const auto& c : testing::bundled_cases(8)) {
        CAPTURE(c.label);
        Rng rng(77);
        for (int k = 0; k < 20; ++k) {
            const Vector u = testing::random_inputs(c, rng);
            const DenseMatrix j = jacobian(c.model.g_y, u);
            for (std::size_t col = 0; col < u.size(); ++col) {
                const double h = 1e-6 * (1 + std::abs(u[col]));
                Vector up = u, dn = u;
                up[col] += h;
                dn[col] -= h;
                const Vector fp = c.model.g_y(up), fm = c.model.g_y(dn);
                for (std::size_t r = 0; r < fp.size(); ++r) {
                    const double fd = (fp[r] - fm[r]) / (2 * h);
                    CHECK(std::abs(fd - j(r, col)) <= 1e-5 * (1 + std::abs(j(r, col))));
                }
            }
        }
    }
}
