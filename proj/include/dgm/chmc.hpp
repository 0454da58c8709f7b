#pragma once

// Constrained Hamiltonian Monte Carlo on the manifold { u : g_y(u) = y_obs }.
//
// One transition: a RATTLE-style trajectory of n_steps kicks, each followed by
// a geodesic flow split into n_geodesic project-and-advance sub-steps, then a
// Metropolis test on the change in H(u, p) = -log pi(u) + p.p / 2, then a fresh
// tangent momentum. The mass matrix is the identity.

#include <cstdint>
#include <span>
#include <utility>

#include "dgm/chain.hpp"
#include "dgm/model.hpp"
#include "dgm/random.hpp"

namespace dgm {

struct SamplerConfig {
    double dt = 0.1;
    std::size_t n_steps = 10;
    std::size_t n_geodesic = 5;
    double eps_proj = 1e-9;
    std::size_t max_newton_iters = 50;
    std::size_t max_fallback_iters = 100;
    std::uint64_t seed = 0;
    // Re-run every geodesic sub-step backwards and reject on mismatch.
    bool reverse_check = true;

    // dt == 0 is accepted as the degenerate "no motion" integrator.
    void validate() const;
};

struct ChainState {
    Vector u;
    Vector p;
    DenseMatrix jacobian;
    LowerTriangular factor;
    double log_pi = 0.0;
    Vector grad_log_pi;
};

// Builds a state at a point on the manifold with the given (tangent) momentum.
ChainState make_state(const GeneratorModel& model, const Observation& obs, Vector u, Vector p);

double hamiltonian(const ChainState& state);

// p - J^T L^{-T} L^{-1} J p: orthogonal projection onto the tangent space.
Vector project_momentum(std::span<const double> p, const DenseMatrix& jacobian, const LowerTriangular& factor);

struct ProjectionResult {
    Vector u;
    std::size_t iters = 0;
    bool fallback_used = false;
};

// Solves c(u_tilde - J_prev^T lambda) = 0 for lambda. The quasi-Newton
// iteration keeps the Gram factor of J_prev fixed; if it stalls or the residual
// more than doubles, a damped Newton iteration with the exact Jacobian takes
// over. Throws ProjectionFailed when both fail.
ProjectionResult project_position(std::span<const double> u_tilde, const DenseMatrix& jacobian_prev,
                                  const LowerTriangular& factor_prev, const GeneratorModel& model,
                                  const Observation& obs, const SamplerConfig& cfg);

struct IntegrationStats {
    std::size_t projection_iters = 0;
    bool fallback_used = false;
};

// n_geodesic sub-steps of length dt / n_geodesic. The returned state has J, L,
// log_pi and the gradient refreshed at the final position. Throws
// ProjectionFailed, or NonReversibleStep when cfg.reverse_check is on.
ChainState simulate_geodesic(ChainState state, const GeneratorModel& model, const Observation& obs,
                             const SamplerConfig& cfg, IntegrationStats* stats = nullptr);

struct DynamicResult {
    ChainState state;
    double delta_h = 0.0;
    IntegrationStats stats;
};

DynamicResult simulate_dynamic(const ChainState& state, const GeneratorModel& model, const Observation& obs,
                               const SamplerConfig& cfg);

// Metropolis-corrected transition followed by a momentum refresh. Integration
// failures count as rejections and are flagged in the record.
std::pair<ChainState, TransitionRecord> step(ChainState state, const GeneratorModel& model,
                                             const Observation& obs, const SamplerConfig& cfg, Rng& rng);

SampleChain run_chain(const GeneratorModel& model, const Observation& obs, const SamplerConfig& cfg,
                      std::size_t n_samples, std::size_t burn_in, Rng& rng);

// Independent chains on separate threads; chain k uses Rng::for_chain(cfg.seed, k).
std::vector<SampleChain> run_chains(const GeneratorModel& model, const Observation& obs, const SamplerConfig& cfg,
                                    std::size_t n_chains, std::size_t n_samples, std::size_t burn_in);

}  // namespace dgm
