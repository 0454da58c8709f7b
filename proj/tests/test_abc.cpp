#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <limits>

#include "dgm/abc.hpp"
#include "dgm/diagnostics.hpp"
#include "dgm/models.hpp"

using namespace dgm;

namespace {

const double inf = std::numeric_limits<double>::infinity();

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::vector<double> column(const SampleChain& c, std::size_t k = 0) {
    std::vector<double> out;
    for (const Vector& z : c.z) out.push_back(z[k]);
    return out;
}

double effective_n(const SampleChain& c) { return effective_sample_size(column(c)).ess; }

// CDF of a density on [-8, 8] given pointwise, by trapezoid accumulation.
struct GridCdf {
    std::vector<double> x;
    std::vector<double> f;

    template <class Density>
    explicit GridCdf(Density density, std::size_t n = 20001) {
        const double h = 16.0 / static_cast<double>(n - 1);
        double acc = 0.0;
        double prev = density(-8.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double xi = -8.0 + h * static_cast<double>(i);
            const double d = density(xi);
            if (i > 0) acc += 0.5 * h * (prev + d);
            prev = d;
            x.push_back(xi);
            f.push_back(acc);
        }
        for (double& v : f) v /= acc;
    }

    double operator()(double v) const {
        if (v <= x.front()) return 0.0;
        if (v >= x.back()) return 1.0;
        const auto it = std::upper_bound(x.begin(), x.end(), v);
        const std::size_t i = static_cast<std::size_t>(it - x.begin());
        const double t = (v - x[i - 1]) / (x[i] - x[i - 1]);
        return f[i - 1] + t * (f[i] - f[i - 1]);
    }
};

AbcConfig config(AbcKernel::Kind kind, double eps, double scale = 0.5, std::uint64_t seed = 1) {
    AbcConfig c;
    c.kernel = {kind, eps};
    c.proposal_scale = scale;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("kernels") {
    const AbcKernel ball{AbcKernel::Kind::uniform_ball, 1.0};
    CHECK(ball.log_kernel(Vector{0.5, 0.5}, Vector{0.0, 0.0}) == 0.0);
    CHECK(ball.log_kernel(Vector{0.8, 0.8}, Vector{0.0, 0.0}) == -inf);
    const AbcKernel gauss{AbcKernel::Kind::gaussian, 2.0};
    CHECK(gauss.log_kernel(Vector{2.0}, Vector{0.0}) == doctest::Approx(-0.5));
    CHECK(gauss.log_kernel(Vector{std::nan("")}, Vector{0.0}) == -inf);
    const AbcKernel wide{AbcKernel::Kind::gaussian, inf};
    CHECK(wide.log_kernel(Vector{1e6}, Vector{0.0}) == 0.0);
    AbcConfig bad;
    bad.kernel.epsilon = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("abc_reject with infinite epsilon accepts every draw and returns the prior") {
    const GeneratorModel m = linear_gaussian_model({1.0, 1.0});
    AbcConfig cfg = config(AbcKernel::Kind::uniform_ball, inf);
    cfg.budget = 20000;
    const SampleChain c = abc_reject(m, {{0.0}, ""}, cfg);
    CHECK(c.accept_rate() == 1.0);
    CHECK(c.size() == 20000);
    CHECK(ks_test(column(c), normal_cdf).p_value > 0.01);
}

TEST_CASE("abc_reject matches the quadrature ABC posterior on y = z + noise") {
    const GeneratorModel m = linear_gaussian_model({1.0, 1.0});
    const double eps = 0.1;
    AbcConfig cfg = config(AbcKernel::Kind::uniform_ball, eps);
    cfg.budget = 200000;
    const SampleChain c = abc_reject(m, {{0.0}, ""}, cfg);
    CHECK(c.size() > 5000);
    CHECK(!zero_acceptance(c));
    const GridCdf cdf([eps](double z) {
        return std::exp(-0.5 * z * z) * (normal_cdf(eps - z) - normal_cdf(-eps - z));
    });
    CHECK(ks_test(column(c), cdf).p_value > 0.01);
}

TEST_CASE("abc_reject flags zero acceptance and weights gaussian draws") {
    const GeneratorModel m = linear_gaussian_model({1.0, 1.0});
    AbcConfig cfg = config(AbcKernel::Kind::uniform_ball, 1e-3);
    cfg.budget = 100;
    const SampleChain none = abc_reject(m, {{40.0}, ""}, cfg);
    CHECK(zero_acceptance(none));
    CHECK(none.size() == 0);

    AbcConfig g = config(AbcKernel::Kind::gaussian, 0.5);
    g.budget = 1000;
    const SampleChain w = abc_reject(m, {{1.0}, ""}, g);
    CHECK(w.size() == 1000);
    CHECK(w.weights.size() == 1000);
    double max_w = 0.0;
    for (double x : w.weights) max_w = std::max(max_w, x);
    CHECK(max_w == 1.0);
}

TEST_CASE("every MCMC variant returns the prior when epsilon is infinite") {
    const GeneratorModel m = linear_gaussian_model({1.0, 1.0});
    const Observation obs{{2.0}, ""};
    const std::size_t n = 50000;
    const SampleChain a = abc_mcmc(m, obs, config(AbcKernel::Kind::uniform_ball, inf, 1.5), n);
    const SampleChain b = abc_input_space_mcmc(m, obs, config(AbcKernel::Kind::gaussian, inf, 1.5), n);
    const SampleChain s = abc_slice_mcmc(m, obs, config(AbcKernel::Kind::uniform_ball, inf), n);
    for (const SampleChain* c : {&a, &b, &s}) {
        CAPTURE(c->method);
        CHECK(c->size() == n);
        CHECK(ks_test(column(*c), normal_cdf, effective_n(*c)).p_value > 0.01);
    }
    // Input-space chain: second coordinate is standard normal too.
    std::vector<double> u2;
    for (const Vector& u : b.u) u2.push_back(u[1]);
    CHECK(ks_test(u2, normal_cdf, effective_sample_size(u2).ess).p_value > 0.01);
}

TEST_CASE("latent-space and input-space ABC-MCMC agree on the toy posterior") {
    const GeneratorModel m = toy1d_model();
    const Observation obs{{1.0}, ""};
    const double eps = 0.3;
    const double grid = toy1d_grid_posterior_mean(1.0, eps);
    const SampleChain a = abc_mcmc(m, obs, config(AbcKernel::Kind::gaussian, eps, 0.8, 3), 200000, 1000);
    const SampleChain b = abc_input_space_mcmc(m, obs, config(AbcKernel::Kind::gaussian, eps, 0.4, 4), 200000, 1000);
    const ChainStats sa = chain_stats(a, {"z"});
    const ChainStats sb = chain_stats(b, {"z"});
    CHECK(std::abs(sa.mean[0] - sb.mean[0]) <= 0.02 * grid);
    CHECK(std::abs(sa.mean[0] - grid) <= 4 * sa.stderr_[0]);
    CHECK(std::abs(sb.mean[0] - grid) <= 4 * sb.stderr_[0]);
}

TEST_CASE("elliptical slice ABC matches the toy quadrature with a gaussian kernel") {
    const GeneratorModel m = toy1d_model();
    const Observation obs{{1.0}, ""};
    const double eps = 0.3;
    const SampleChain s = abc_slice_mcmc(m, obs, config(AbcKernel::Kind::gaussian, eps, 1.0, 5), 100000, 1000);
    const ChainStats st = chain_stats(s, {"z"});
    CHECK(std::abs(st.mean[0] - toy1d_grid_posterior_mean(1.0, eps)) <= 4 * st.stderr_[0]);
}

TEST_CASE("ABC chains are deterministic and stay inside the ball") {
    const GeneratorModel m = toy1d_model();
    const Observation obs{{1.0}, ""};
    const AbcConfig cfg = config(AbcKernel::Kind::uniform_ball, 0.2, 0.3, 7);
    const SampleChain a = abc_slice_mcmc(m, obs, cfg, 500);
    const SampleChain b = abc_slice_mcmc(m, obs, cfg, 500);
    CHECK(a.u == b.u);
    for (const Vector& u : a.u) CHECK(std::abs(m.g_y(u)[0] - 1.0) < 0.2);
    const SampleChain c = abc_mcmc(m, obs, cfg, 500);
    for (const Vector& u : c.u) CHECK(std::abs(m.g_y(u)[0] - 1.0) < 0.2);
    CHECK_THROWS_AS(abc_mcmc(circle_model(1.0), {{1.0}, ""}, cfg, 10), std::invalid_argument);
}

TEST_CASE("input-space ABC on the linear-sum model approaches the exact conditional mean") {
    const GeneratorModel m = linear_gaussian_model({1.0, 1.0});
    const Observation obs{{3.0}, ""};
    std::vector<double> errors;
    for (double eps : {1.0, 0.1, 0.01}) {
        CAPTURE(eps);
        const SampleChain c =
            abc_input_space_mcmc(m, obs, config(AbcKernel::Kind::gaussian, eps, 0.5, 5), 1000000, 1000);
        const ChainStats s = chain_stats(c, m.latent_names);
        // Gaussian kernel: y ~ N(0, 2 + eps^2) so E[u1 | y_obs] = y_obs / (2 + eps^2).
        CHECK(std::abs(s.mean[0] - 3.0 / (2.0 + eps * eps)) <= 4 * s.stderr_[0]);
        errors.push_back(std::abs(s.mean[0] - 1.5));
    }
    CHECK(errors[0] > errors[1]);
    CHECK(errors[0] > errors[2]);
}

TEST_CASE("on Lotka-Volterra at eps = 10 the slice sampler moves where abc_mcmc sticks") {
    LotkaVolterraSpec spec;
    const GeneratorModel m = lotka_volterra_model(spec);
    Rng rng(7);
    const Vector noise = rng.normal_vector(2 * spec.n_steps);
    const Observation obs{m.g_y(lotka_volterra_inputs(spec, lotka_volterra_reference_params, noise)), ""};
    const SampleChain walk = abc_mcmc(m, obs, config(AbcKernel::Kind::uniform_ball, 10.0, 0.1, 2), 5000);
    const SampleChain slice = abc_slice_mcmc(m, obs, config(AbcKernel::Kind::uniform_ball, 10.0, 0.1, 2), 5000);
    double walk_distance = 0.0;
    double slice_distance = 0.0;
    for (std::size_t i = 1; i < 5000; ++i) {
        for (std::size_t k = 0; k < 4; ++k) {
            walk_distance += std::abs(walk.z[i][k] - walk.z[i - 1][k]);
            slice_distance += std::abs(slice.z[i][k] - slice.z[i - 1][k]);
        }
    }
    MESSAGE("abc_mcmc accept ", walk.accept_rate(), ", distance ", walk_distance, "; slice distance ", slice_distance);
    CHECK(slice.accept_rate() > 0.99);
    CHECK(slice_distance > 0.0);
    CHECK(walk.accept_rate() < 0.01);
    CHECK(slice_distance > 100 * walk_distance);
}
