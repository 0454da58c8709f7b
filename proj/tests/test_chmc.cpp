#include <doctest.h>

#include <cmath>

#include "dgm/chmc.hpp"
#include "dgm/errors.hpp"
#include "dgm/target.hpp"
#include "test_support.hpp"

using namespace dgm;

namespace {

const Observation line_obs{{3.0}, ""};

ChainState state_at(const testing::Case& c, const Vector& u, Rng& rng) {
    ChainState s = make_state(c.model, c.obs, u, Vector(u.size(), 0.0));
    s.p = project_momentum(rng.normal_vector(u.size()), s.jacobian, s.factor);
    return s;
}

}  // namespace

TEST_CASE("project_momentum removes the normal component") {
    const DenseMatrix j = DenseMatrix::from_rows({{1, 0}});
    const Vector p = project_momentum(Vector{3, 4}, j, cholesky(gram(j)));
    CHECK(std::abs(p[0]) <= 1e-15);
    CHECK(p[1] == doctest::Approx(4.0));

    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        DenseMatrix a(3, 7);
        for (std::size_t r = 0; r < 3; ++r)
            for (std::size_t c = 0; c < 7; ++c) a(r, c) = rng.normal();
        const LowerTriangular l = cholesky(gram(a));
        const Vector q = rng.normal_vector(7);
        const Vector once = project_momentum(q, a, l);
        const Vector twice = project_momentum(once, a, l);
        CHECK(max_abs(matvec(a, once)) <= 1e-10 * (1 + norm2(q)));
        CHECK(max_abs_diff(once, twice) <= 1e-12 * (1 + norm2(q)));
        // Orthogonal: the removed part is orthogonal to the kept part.
        Vector removed = q;
        for (std::size_t i = 0; i < 7; ++i) removed[i] -= once[i];
        CHECK(std::abs(dot(removed, once)) <= 1e-10 * (1 + dot(q, q)));
    }
}

TEST_CASE("project_position converges in one iteration on a linear constraint") {
    const GeneratorModel m = linear_gaussian_model({1.0, 1.0});
    const Vector u{1.0, 2.0};
    const ConstraintFactor f = constraint_jacobian(m, line_obs, u);
    const ProjectionResult r = project_position(Vector{1.5, 2.7}, f.jacobian, f.factor, m, line_obs, SamplerConfig{});
    CHECK(r.iters == 1);
    CHECK(!r.fallback_used);
    CHECK(std::abs(r.u[0] + r.u[1] - 3.0) <= 1e-12);
}

TEST_CASE("project_position returns a circle point radially") {
    const GeneratorModel m = circle_model(1.0);
    const Observation obs{{1.0}, ""};
    const ConstraintFactor f = constraint_jacobian(m, obs, Vector{1.0, 0.0});
    const ProjectionResult r = project_position(Vector{1.1, 0.0}, f.jacobian, f.factor, m, obs, SamplerConfig{});
    CHECK(r.u[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.u[1] == 0.0);
}

TEST_CASE("project_position falls back when quasi-Newton diverges and fails cleanly") {
    const GeneratorModel m = circle_model(1.0);
    const Observation obs{{1.0}, ""};
    // A conditioner with a far too small Gram matrix: the first frozen
    // step overshoots to y = -4.75 and the residual grows.
    const ConstraintFactor f = constraint_jacobian(m, obs, Vector{0.0, 0.1});
    const ProjectionResult r = project_position(Vector{0.0, 1.5}, f.jacobian, f.factor, m, obs, SamplerConfig{});
    CHECK(r.fallback_used);
    CHECK(r.u[1] == doctest::Approx(1.0).epsilon(1e-9));

    // The displacement line u_tilde - t J_prev^T misses the circle entirely.
    const ConstraintFactor g = constraint_jacobian(m, obs, Vector{1.0, 0.0});
    CHECK_THROWS_AS(project_position(Vector{0.0, 2.0}, g.jacobian, g.factor, m, obs, SamplerConfig{}),
                    ProjectionFailed);
}

TEST_CASE("simulate_geodesic on a linear constraint moves in a straight line") {
    const testing::Case c{"line", linear_gaussian_model({1.0, 1.0}), line_obs};
    ChainState s = make_state(c.model, c.obs, Vector{1.0, 2.0}, Vector{0.5, -0.5});
    const SamplerConfig cfg;
    const ChainState t = simulate_geodesic(s, c.model, c.obs, cfg);
    CHECK(t.u[0] == doctest::Approx(1.0 + cfg.dt * 0.5).epsilon(1e-14));
    CHECK(t.u[1] == doctest::Approx(2.0 - cfg.dt * 0.5).epsilon(1e-14));
    CHECK(max_abs_diff(t.p, s.p) <= 1e-14);
}

TEST_CASE("simulate_geodesic on the circle follows the rotation") {
    const GeneratorModel m = circle_model(1.0);
    const Observation obs{{1.0}, ""};
    ChainState s = make_state(m, obs, Vector{1.0, 0.0}, Vector{0.0, 1.0});
    for (double dt : {0.1, 0.05, 0.025}) {
        SamplerConfig cfg;
        cfg.dt = dt;
        cfg.n_geodesic = 1;
        const ChainState t = simulate_geodesic(s, m, obs, cfg);
        const double angle = std::atan2(t.u[1], t.u[0]);
        CHECK(std::abs(norm2(t.u) - 1.0) <= 1e-9);
        // Arc length dt up to O(dt^2); a single horizontal projection of
        // (1, dt) lands exactly at angle asin(dt).
        CHECK(std::abs(angle - dt) <= dt * dt);
        CHECK(angle == doctest::Approx(std::asin(dt)).epsilon(1e-9));
    }
}

TEST_CASE("zero momentum leaves the geodesic state unchanged") {
    const GeneratorModel m = toy1d_model();
    const Observation obs{{1.0}, ""};
    const Vector u = find_initial(m, obs, 3);
    const ChainState s = make_state(m, obs, u, Vector{0.0, 0.0});
    const ChainState t = simulate_geodesic(s, m, obs, SamplerConfig{});
    CHECK(max_abs_diff(t.u, s.u) == 0.0);
    CHECK(max_abs(t.p) == 0.0);
}

TEST_CASE("single-step dynamic on the linear-sum model matches the closed form") {
    const GeneratorModel m = linear_gaussian_model({1.0, 1.0});
    const Vector u{1.0, 2.0};
    SamplerConfig cfg;
    cfg.n_steps = 1;
    const ChainState s = make_state(m, line_obs, u, Vector{0.0, 0.0});
    const DynamicResult r = simulate_dynamic(s, m, line_obs, cfg);

    // Tangent projector onto {v : v1 + v2 = 0}; grad log pi = -u.
    auto tangent = [](double a, double b) { return std::array<double, 2>{(a - b) / 2, (b - a) / 2}; };
    const double h = cfg.dt;
    const auto p_half = tangent(-h / 2 * u[0], -h / 2 * u[1]);
    const double u1 = u[0] + h * p_half[0];
    const double u2 = u[1] + h * p_half[1];
    const auto p_end = tangent(p_half[0] - h / 2 * u1, p_half[1] - h / 2 * u2);
    const double dh = 0.5 * (u1 * u1 + u2 * u2) - 0.5 * dot(u, u) +
                      0.5 * (p_end[0] * p_end[0] + p_end[1] * p_end[1]);
    CHECK(r.state.u[0] == doctest::Approx(u1).epsilon(1e-14));
    CHECK(r.state.u[1] == doctest::Approx(u2).epsilon(1e-14));
    CHECK(r.delta_h == doctest::Approx(dh).epsilon(1e-10));
}

TEST_CASE("dynamic is reversible on every bundled model") {
    for (const auto& c : testing::bundled_cases(10)) {
        CAPTURE(c.label);
        Rng rng(55);
        const SamplerConfig cfg;
        for (const Vector& u : testing::manifold_points(c, 5)) {
            const ChainState s = state_at(c, u, rng);
            DynamicResult fwd = simulate_dynamic(s, c.model, c.obs, cfg);
            for (double& v : fwd.state.p) v = -v;
            const DynamicResult back = simulate_dynamic(fwd.state, c.model, c.obs, cfg);
            CHECK(max_abs_diff(back.state.u, s.u) <= 1e-6);
            CHECK(fwd.delta_h == doctest::Approx(-back.delta_h).epsilon(1e-6).scale(1));
        }
    }
}

TEST_CASE("proposals keep constraint and tangency") {
    for (const auto& c : testing::bundled_cases(10)) {
        CAPTURE(c.label);
        Rng rng(56);
        const SamplerConfig cfg;
        const Vector u = find_initial(c.model, c.obs, 9);
        const DynamicResult r = simulate_dynamic(state_at(c, u, rng), c.model, c.obs, cfg);
        CHECK(max_abs(constraint(c.model, c.obs, r.state.u)) <= cfg.eps_proj);
        const DenseMatrix j = jacobian(c.model.g_y, r.state.u);
        CHECK(max_abs(matvec(j, r.state.p)) <= 1e-8 * (1 + norm2(r.state.p)));
    }
}

TEST_CASE("energy error is second order") {
    const testing::Case c{"toy", toy1d_model(), {{1.0}, ""}};
    Rng rng(4);
    const ChainState s = state_at(c, find_initial(c.model, c.obs, 2), rng);
    SamplerConfig coarse;
    coarse.dt = 0.1;
    coarse.n_steps = 10;
    SamplerConfig fine = coarse;
    fine.dt = 0.05;
    fine.n_steps = 20;
    const double a = std::abs(simulate_dynamic(s, c.model, c.obs, coarse).delta_h);
    const double b = std::abs(simulate_dynamic(s, c.model, c.obs, fine).delta_h);
    CHECK(a / b > 3.0);
    CHECK(a / b < 5.0);
}

TEST_CASE("step with dt = 0 always accepts and only refreshes momentum") {
    const testing::Case c{"toy", toy1d_model(), {{1.0}, ""}};
    Rng rng(8);
    SamplerConfig cfg;
    cfg.dt = 0.0;
    ChainState s = state_at(c, find_initial(c.model, c.obs, 5), rng);
    const Vector u0 = s.u;
    for (int k = 0; k < 200; ++k) {
        auto [next, rec] = step(std::move(s), c.model, c.obs, cfg, rng);
        CHECK(rec.accepted);
        s = std::move(next);
    }
    CHECK(max_abs_diff(s.u, u0) == 0.0);
}

TEST_CASE("run_chain metadata, empty chains and determinism") {
    const testing::Case c{"toy", toy1d_model(), {{1.0}, ""}};
    SamplerConfig cfg;
    Rng r0(1);
    const SampleChain empty = run_chain(c.model, c.obs, cfg, 0, 0, r0);
    CHECK(empty.size() == 0);
    CHECK(empty.method == "chmc");
    CHECK(empty.accept_rate() == 0.0);

    Rng r1(9), r2(9);
    const SampleChain a = run_chain(c.model, c.obs, cfg, 50, 10, r1);
    const SampleChain b = run_chain(c.model, c.obs, cfg, 50, 10, r2);
    REQUIRE(a.size() == 50);
    CHECK(a.records.size() == 50);
    CHECK(a.u == b.u);
    CHECK(a.z == b.z);
    for (const Vector& u : a.u) CHECK(max_abs(constraint(c.model, c.obs, u)) <= cfg.eps_proj);
    CHECK(a.wall_seconds >= 0.0);
}

TEST_CASE("run_chains gives each chain its own stream") {
    const testing::Case c{"toy", toy1d_model(), {{1.0}, ""}};
    SamplerConfig cfg;
    cfg.seed = 3;
    const auto chains = run_chains(c.model, c.obs, cfg, 3, 20, 5);
    REQUIRE(chains.size() == 3);
    CHECK(chains[0].u != chains[1].u);
    Rng rng = Rng::for_chain(3, 1);
    CHECK(run_chain(c.model, c.obs, cfg, 20, 5, rng).u == chains[1].u);
}

TEST_CASE("sampler configuration validation") {
    SamplerConfig cfg;
    cfg.n_steps = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.eps_proj = 1e-3;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.dt = -0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
