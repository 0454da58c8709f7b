#pragma once

// Approximate Bayesian computation baselines. All of them replace the exact
// constraint g_y(u) = y_obs by a kernel k_eps(y_obs; g_y(u)):
//   uniform ball  k = 1[|y_obs - y| < eps] / eps^N      (Euclidean norm)
//   gaussian      k = N(y_obs; y, eps^2 I)
// An infinite epsilon makes every kernel constant.

#include <cstdint>
#include <span>

#include "dgm/chain.hpp"
#include "dgm/model.hpp"

namespace dgm {

struct AbcKernel {
    enum class Kind { uniform_ball, gaussian };

    Kind kind = Kind::uniform_ball;
    double epsilon = 1.0;

    // log k up to a constant shared by all y; -inf outside the ball or for
    // non-finite y.
    double log_kernel(std::span<const double> y, std::span<const double> y_obs) const;
};

struct AbcConfig {
    AbcKernel kernel;
    double proposal_scale = 0.1;
    // Number of prior draws for abc_reject.
    std::size_t budget = 10000;
    std::uint64_t seed = 0;

    void validate() const;
};

// Draws u ~ rho `budget` times. Uniform ball: keeps the hits. Gaussian: keeps
// every finite draw with weight k / max k in chain.weights. attempts and
// accepted count draws and hits.
SampleChain abc_reject(const GeneratorModel& model, const Observation& obs, const AbcConfig& cfg);

// True when a rejection run produced nothing; not an error in itself.
inline bool zero_acceptance(const SampleChain& chain) { return chain.attempts > 0 && chain.accepted == 0; }

// Random walk on the latent inputs (scale proposal_scale) with the noise
// inputs redrawn from rho at every proposal, accepted with probability
// min(1, k(y') rho(u_z') / (k(y) rho(u_z))). For the Lotka-Volterra model the
// latent inputs are affine in the log-rates, so this is a log-space walk.
// Requires a directed model with a standard-normal base.
SampleChain abc_mcmc(const GeneratorModel& model, const Observation& obs, const AbcConfig& cfg,
                     std::size_t n_samples, std::size_t burn_in = 0);

// Random-walk Metropolis on all inputs targeting k(y_obs; g_y(u)) rho(u).
SampleChain abc_input_space_mcmc(const GeneratorModel& model, const Observation& obs, const AbcConfig& cfg,
                                 std::size_t n_samples, std::size_t burn_in = 0);

// Alternating elliptical slice updates of the latent and noise input blocks
// with the kernel as likelihood. Requires a standard-normal base; a model
// without a directed split is updated as a single block.
SampleChain abc_slice_mcmc(const GeneratorModel& model, const Observation& obs, const AbcConfig& cfg,
                           std::size_t n_samples, std::size_t burn_in = 0);

}  // namespace dgm
