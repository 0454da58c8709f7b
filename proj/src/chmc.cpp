#include "dgm/chmc.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>

#include "dgm/errors.hpp"
#include "dgm/target.hpp"

namespace dgm {

void SamplerConfig::validate() const {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw std::invalid_argument("sampler: dt must be finite and >= 0");
    if (n_steps < 1) throw std::invalid_argument("sampler: n_steps must be >= 1");
    if (n_geodesic < 1) throw std::invalid_argument("sampler: n_geodesic must be >= 1");
    if (!(eps_proj > 0.0) || eps_proj > 1e-6) throw std::invalid_argument("sampler: eps_proj must be in (0, 1e-6]");
    if (max_newton_iters < 1 || max_fallback_iters < 1)
        throw std::invalid_argument("sampler: iteration caps must be >= 1");
}

ChainState make_state(const GeneratorModel& model, const Observation& obs, Vector u, Vector p) {
    if (u.size() != model.input_dim || p.size() != model.input_dim)
        throw DimensionMismatch("make_state: length mismatch");
    TargetEvaluation e = log_target(model, obs, u);
    ChainState s;
    s.u = std::move(u);
    s.p = std::move(p);
    s.jacobian = std::move(e.jacobian);
    s.factor = std::move(e.factor);
    s.log_pi = e.log_pi;
    s.grad_log_pi = std::move(e.grad_log_pi);
    return s;
}

double hamiltonian(const ChainState& state) { return -state.log_pi + 0.5 * dot(state.p, state.p); }

Vector project_momentum(std::span<const double> p, const DenseMatrix& jacobian, const LowerTriangular& factor) {
    const Vector jp = matvec(jacobian, p);
    const Vector w = solve_triangular(factor, solve_triangular(factor, jp, false), true);
    const Vector correction = matvec_transposed(jacobian, w);
    Vector out(p.begin(), p.end());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= correction[i];
    return out;
}

namespace {

double residual_norm(const Vector& c) { return max_abs(c); }

// One past the last nonzero of each row, so that J^T products skip the
// structurally empty tail of autoregressive Jacobians.
std::vector<std::size_t> row_extents(const DenseMatrix& a) {
    std::vector<std::size_t> ext(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        std::size_t e = r.size();
        while (e > 0 && r[e - 1] == 0.0) --e;
        ext[i] = e;
    }
    return ext;
}

// u -= J^T step
void subtract_transposed(Vector& u, const DenseMatrix& jacobian, const std::vector<std::size_t>& ext,
                         const Vector& step) {
    for (std::size_t i = 0; i < jacobian.rows(); ++i) {
        const double si = step[i];
        const double* r = jacobian.row(i).data();
        for (std::size_t j = 0; j < ext[i]; ++j) u[j] -= r[j] * si;
    }
}

Vector displaced(std::span<const double> u_tilde, const DenseMatrix& jacobian_prev, const Vector& lambda) {
    Vector u(u_tilde.begin(), u_tilde.end());
    const Vector shift = matvec_transposed(jacobian_prev, lambda);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] -= shift[i];
    return u;
}

// Damped Newton on lambda with the exact Jacobian at the current point.
bool newton_fallback(std::span<const double> u_tilde, const DenseMatrix& jacobian_prev, Vector& lambda,
                     const GeneratorModel& model, const Observation& obs, const SamplerConfig& cfg,
                     ProjectionResult& result) {
    Vector u = displaced(u_tilde, jacobian_prev, lambda);
    Vector c = constraint(model, obs, u);
    const DenseMatrix jp_t = jacobian_prev.transposed();
    for (std::size_t it = 0; it < cfg.max_fallback_iters; ++it) {
        if (residual_norm(c) <= cfg.eps_proj) {
            result.u = std::move(u);
            return true;
        }
        Vector delta;
        try {
            delta = solve_lu(matmul(jacobian(model.g_y, u), jp_t), c);
        } catch (const std::runtime_error&) {
            return false;
        }
        const double f0 = 0.5 * dot(c, c);
        double alpha = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 30; ++ls, alpha *= 0.5) {
            Vector trial = lambda;
            for (std::size_t i = 0; i < trial.size(); ++i) trial[i] += alpha * delta[i];
            Vector ut = displaced(u_tilde, jacobian_prev, trial);
            Vector ct = constraint(model, obs, ut);
            const double f1 = 0.5 * dot(ct, ct);
            if (std::isfinite(f1) && f1 <= (1.0 - 1e-4 * alpha) * f0) {
                lambda = std::move(trial);
                u = std::move(ut);
                c = std::move(ct);
                moved = true;
                break;
            }
        }
        ++result.iters;
        if (!moved) return false;
    }
    if (residual_norm(c) <= cfg.eps_proj) {
        result.u = std::move(u);
        return true;
    }
    return false;
}

}  // namespace

ProjectionResult project_position(std::span<const double> u_tilde, const DenseMatrix& jacobian_prev,
                                  const LowerTriangular& factor_prev, const GeneratorModel& model,
                                  const Observation& obs, const SamplerConfig& cfg) {
    const std::size_t n = model.observed_dim;
    ProjectionResult result;
    Vector lambda(n, 0.0);
    Vector u(u_tilde.begin(), u_tilde.end());
    Vector c = constraint(model, obs, u);
    double r = residual_norm(c);
    Vector best_lambda = lambda;
    double best_r = r;

    bool diverged = !std::isfinite(r);
    const std::vector<std::size_t> ext = row_extents(jacobian_prev);
    while (!diverged && r > cfg.eps_proj && result.iters < cfg.max_newton_iters) {
        const Vector step = solve_triangular(factor_prev, solve_triangular(factor_prev, c, false), true);
        for (std::size_t i = 0; i < n; ++i) lambda[i] += step[i];
        subtract_transposed(u, jacobian_prev, ext, step);
        c = constraint(model, obs, u);
        ++result.iters;
        const double r_new = residual_norm(c);
        if (!std::isfinite(r_new) || r_new > 2.0 * r) diverged = true;
        r = r_new;
        if (r < best_r) {
            best_r = r;
            best_lambda = lambda;
        }
    }
    if (!diverged && r <= cfg.eps_proj) {
        result.u = std::move(u);
        return result;
    }

    result.fallback_used = true;
    lambda = std::isfinite(best_r) ? best_lambda : Vector(n, 0.0);
    if (newton_fallback(u_tilde, jacobian_prev, lambda, model, obs, cfg, result)) return result;
    throw ProjectionFailed("project_position: quasi-Newton and fallback Newton both failed to converge");
}

namespace {

void refresh_target(ChainState& s, const GeneratorModel& model, const Observation& obs) {
    ConstraintFactor f{std::move(s.jacobian), std::move(s.factor)};
    s.grad_log_pi = grad_log_target(model, obs, s.u, f);
    s.log_pi = log_target_value(model, s.u, f.factor);
    s.jacobian = std::move(f.jacobian);
    s.factor = std::move(f.factor);
}

void kick(ChainState& s, double h) {
    for (std::size_t i = 0; i < s.p.size(); ++i) s.p[i] += h * s.grad_log_pi[i];
    s.p = project_momentum(s.p, s.jacobian, s.factor);
}

}  // namespace

ChainState simulate_geodesic(ChainState state, const GeneratorModel& model, const Observation& obs,
                             const SamplerConfig& cfg, IntegrationStats* stats) {
    if (cfg.dt == 0.0) return state;
    const double h = cfg.dt / static_cast<double>(cfg.n_geodesic);
    const std::size_t m = state.u.size();
    Vector u_tilde(m);
    for (std::size_t g = 0; g < cfg.n_geodesic; ++g) {
        for (std::size_t i = 0; i < m; ++i) u_tilde[i] = state.u[i] + h * state.p[i];
        ProjectionResult proj = project_position(u_tilde, state.jacobian, state.factor, model, obs, cfg);
        if (stats) {
            stats->projection_iters += proj.iters;
            stats->fallback_used = stats->fallback_used || proj.fallback_used;
        }
        ConstraintFactor f = constraint_jacobian(model, obs, proj.u);
        Vector p_tilde(m);
        for (std::size_t i = 0; i < m; ++i) p_tilde[i] = (proj.u[i] - state.u[i]) / h;
        Vector p_new = project_momentum(p_tilde, f.jacobian, f.factor);

        if (cfg.reverse_check) {
            for (std::size_t i = 0; i < m; ++i) u_tilde[i] = proj.u[i] - h * p_new[i];
            Vector back;
            try {
                back = project_position(u_tilde, f.jacobian, f.factor, model, obs, cfg).u;
            } catch (const ProjectionFailed&) {
                throw NonReversibleStep("simulate_geodesic: reverse projection failed");
            }
            if (max_abs_diff(back, state.u) > 10.0 * cfg.eps_proj)
                throw NonReversibleStep("simulate_geodesic: reverse sub-step did not return to start");
        }

        state.u = std::move(proj.u);
        state.p = std::move(p_new);
        state.jacobian = std::move(f.jacobian);
        state.factor = std::move(f.factor);
    }
    refresh_target(state, model, obs);
    return state;
}

DynamicResult simulate_dynamic(const ChainState& state, const GeneratorModel& model, const Observation& obs,
                               const SamplerConfig& cfg) {
    DynamicResult out;
    ChainState s = state;
    kick(s, 0.5 * cfg.dt);
    s = simulate_geodesic(std::move(s), model, obs, cfg, &out.stats);
    for (std::size_t k = 1; k < cfg.n_steps; ++k) {
        kick(s, cfg.dt);
        s = simulate_geodesic(std::move(s), model, obs, cfg, &out.stats);
    }
    kick(s, 0.5 * cfg.dt);
    out.delta_h = hamiltonian(s) - hamiltonian(state);
    out.state = std::move(s);
    return out;
}

std::pair<ChainState, TransitionRecord> step(ChainState state, const GeneratorModel& model,
                                             const Observation& obs, const SamplerConfig& cfg, Rng& rng) {
    TransitionRecord rec;
    std::optional<DynamicResult> proposal;
    try {
        proposal = simulate_dynamic(state, model, obs, cfg);
    } catch (const NonReversibleStep&) {
        rec.nonreversible_rejected = true;
    } catch (const ProjectionFailed&) {
        rec.projection_failed = true;
    } catch (const NotPositiveDefinite&) {
        rec.projection_failed = true;
    } catch (const NonFiniteDerivative&) {
        rec.projection_failed = true;
    }

    const double r = rng.uniform();
    if (proposal) {
        rec.delta_h = proposal->delta_h;
        rec.projection_iters = proposal->stats.projection_iters;
        rec.fallback_used = proposal->stats.fallback_used;
        if (std::isfinite(rec.delta_h) && r < std::exp(-rec.delta_h)) {
            rec.accepted = true;
            state = std::move(proposal->state);
        }
    } else {
        rec.delta_h = std::numeric_limits<double>::infinity();
    }

    const Vector n = rng.normal_vector(state.u.size());
    state.p = project_momentum(n, state.jacobian, state.factor);
    return {std::move(state), rec};
}

SampleChain run_chain(const GeneratorModel& model, const Observation& obs, const SamplerConfig& cfg,
                      std::size_t n_samples, std::size_t burn_in, Rng& rng) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    SampleChain chain;
    chain.method = "chmc";

    InitOptions init;
    init.tolerance = cfg.eps_proj;
    Vector u0 = find_initial(model, obs, rng.next_u64(), init);
    ChainState state = make_state(model, obs, std::move(u0), Vector(model.input_dim, 0.0));
    state.p = project_momentum(rng.normal_vector(model.input_dim), state.jacobian, state.factor);

    chain.u.reserve(n_samples);
    chain.p.reserve(n_samples);
    chain.z.reserve(n_samples);
    chain.records.reserve(n_samples);
    for (std::size_t it = 0; it < burn_in + n_samples; ++it) {
        auto [next, rec] = step(std::move(state), model, obs, cfg, rng);
        state = std::move(next);
        if (it < burn_in) continue;
        ++chain.attempts;
        if (rec.accepted) ++chain.accepted;
        chain.records.push_back(rec);
        chain.u.push_back(state.u);
        chain.p.push_back(state.p);
        chain.z.push_back(model.g_z(state.u));
    }
    chain.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return chain;
}

std::vector<SampleChain> run_chains(const GeneratorModel& model, const Observation& obs, const SamplerConfig& cfg,
                                    std::size_t n_chains, std::size_t n_samples, std::size_t burn_in) {
    std::vector<SampleChain> chains(n_chains);
    std::vector<std::exception_ptr> errors(n_chains);
    std::vector<std::thread> workers;
    workers.reserve(n_chains);
    for (std::size_t k = 0; k < n_chains; ++k) {
        workers.emplace_back([&, k] {
            try {
                Rng rng = Rng::for_chain(cfg.seed, k);
                chains[k] = run_chain(model, obs, cfg, n_samples, burn_in, rng);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return chains;
}

}  // namespace dgm
