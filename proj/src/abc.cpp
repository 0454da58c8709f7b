#include "dgm/abc.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "dgm/errors.hpp"

namespace dgm {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void store(SampleChain& chain, const GeneratorModel& model, const Vector& u, bool accepted) {
    chain.u.push_back(u);
    chain.z.push_back(model.g_z(u));
    TransitionRecord rec;
    rec.accepted = accepted;
    rec.delta_h = std::numeric_limits<double>::quiet_NaN();
    chain.records.push_back(rec);
    ++chain.attempts;
    if (accepted) ++chain.accepted;
}

// An exact manifold point lies inside every kernel's support.
Vector start_point(const GeneratorModel& model, const Observation& obs, Rng& rng) {
    return find_initial(model, obs, rng.next_u64());
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = i;
    return v;
}

}  // namespace

double AbcKernel::log_kernel(std::span<const double> y, std::span<const double> y_obs) const {
    if (y.size() != y_obs.size()) throw DimensionMismatch("log_kernel: output length mismatch");
    double sq = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - y_obs[i];
        sq += r * r;
    }
    if (!std::isfinite(sq)) return neg_inf;
    if (std::isinf(epsilon)) return 0.0;
    if (kind == Kind::uniform_ball) return std::sqrt(sq) < epsilon ? 0.0 : neg_inf;
    return -0.5 * sq / (epsilon * epsilon);
}

void AbcConfig::validate() const {
    if (!(kernel.epsilon > 0.0)) throw std::invalid_argument("abc: epsilon must be > 0");
    if (!(proposal_scale > 0.0) || !std::isfinite(proposal_scale))
        throw std::invalid_argument("abc: proposal_scale must be finite and > 0");
    if (budget < 1) throw std::invalid_argument("abc: budget must be >= 1");
}

SampleChain abc_reject(const GeneratorModel& model, const Observation& obs, const AbcConfig& cfg) {
    cfg.validate();
    if (obs.values.size() != model.observed_dim) throw DimensionMismatch("abc_reject: observation length mismatch");
    const auto start = Clock::now();
    SampleChain chain;
    chain.method = "abc-reject";
    Rng rng(cfg.seed);
    const bool weighted = cfg.kernel.kind == AbcKernel::Kind::gaussian && !std::isinf(cfg.kernel.epsilon);
    std::vector<double> log_w;
    double max_log_w = neg_inf;
    for (std::size_t i = 0; i < cfg.budget; ++i) {
        ++chain.attempts;
        const Vector u = model.base.sample(rng);
        const double lk = cfg.kernel.log_kernel(model.g_y(u), obs.values);
        if (lk == neg_inf) continue;
        ++chain.accepted;
        chain.u.push_back(u);
        chain.z.push_back(model.g_z(u));
        TransitionRecord rec;
        rec.accepted = true;
        rec.delta_h = std::numeric_limits<double>::quiet_NaN();
        chain.records.push_back(rec);
        if (weighted) {
            log_w.push_back(lk);
            max_log_w = std::max(max_log_w, lk);
        }
    }
    if (weighted) {
        chain.weights.reserve(log_w.size());
        for (double lw : log_w) chain.weights.push_back(std::exp(lw - max_log_w));
    }
    chain.wall_seconds = seconds_since(start);
    return chain;
}

SampleChain abc_mcmc(const GeneratorModel& model, const Observation& obs, const AbcConfig& cfg,
                     std::size_t n_samples, std::size_t burn_in) {
    cfg.validate();
    if (!model.directed) throw std::invalid_argument("abc_mcmc: model must declare a directed split");
    if (!model.base.standard_normal) throw std::invalid_argument("abc_mcmc: requires a standard-normal base");
    const auto start = Clock::now();
    const auto& latent = model.directed->latent_inputs;
    const auto& noise = model.directed->noise_inputs;

    SampleChain chain;
    chain.method = "abc-mcmc";
    Rng rng(cfg.seed);
    Vector u = start_point(model, obs, rng);
    double lk = cfg.kernel.log_kernel(model.g_y(u), obs.values);
    auto log_prior_latent = [&](const Vector& x) {
        double s = 0.0;
        for (std::size_t i : latent) s += x[i] * x[i];
        return -0.5 * s;
    };
    double lp = log_prior_latent(u);

    for (std::size_t it = 0; it < burn_in + n_samples; ++it) {
        Vector prop = u;
        for (std::size_t i : latent) prop[i] += cfg.proposal_scale * rng.normal();
        for (std::size_t i : noise) prop[i] = rng.normal();
        const double lk_new = cfg.kernel.log_kernel(model.g_y(prop), obs.values);
        const double lp_new = log_prior_latent(prop);
        const double log_ratio = lk_new + lp_new - lk - lp;
        const double r = rng.uniform();
        bool accepted = false;
        if (lk_new != neg_inf && (log_ratio >= 0.0 || r < std::exp(log_ratio))) {
            u = std::move(prop);
            lk = lk_new;
            lp = lp_new;
            accepted = true;
        }
        if (it >= burn_in) store(chain, model, u, accepted);
    }
    chain.wall_seconds = seconds_since(start);
    return chain;
}

SampleChain abc_input_space_mcmc(const GeneratorModel& model, const Observation& obs, const AbcConfig& cfg,
                                 std::size_t n_samples, std::size_t burn_in) {
    cfg.validate();
    const auto start = Clock::now();
    SampleChain chain;
    chain.method = "abc-input";
    Rng rng(cfg.seed);
    Vector u = start_point(model, obs, rng);
    double lt = cfg.kernel.log_kernel(model.g_y(u), obs.values) + model.base.log_density(u);

    for (std::size_t it = 0; it < burn_in + n_samples; ++it) {
        Vector prop = u;
        for (double& x : prop) x += cfg.proposal_scale * rng.normal();
        const double lk_new = cfg.kernel.log_kernel(model.g_y(prop), obs.values);
        const double lt_new = lk_new == neg_inf ? neg_inf : lk_new + model.base.log_density(prop);
        const double log_ratio = lt_new - lt;
        const double r = rng.uniform();
        bool accepted = false;
        if (lt_new != neg_inf && (log_ratio >= 0.0 || r < std::exp(log_ratio))) {
            u = std::move(prop);
            lt = lt_new;
            accepted = true;
        }
        if (it >= burn_in) store(chain, model, u, accepted);
    }
    chain.wall_seconds = seconds_since(start);
    return chain;
}

SampleChain abc_slice_mcmc(const GeneratorModel& model, const Observation& obs, const AbcConfig& cfg,
                           std::size_t n_samples, std::size_t burn_in) {
    cfg.validate();
    if (!model.base.standard_normal) throw std::invalid_argument("abc_slice_mcmc: requires a standard-normal base");
    const auto start = Clock::now();
    std::vector<std::vector<std::size_t>> blocks;
    if (model.directed) {
        blocks = {model.directed->latent_inputs, model.directed->noise_inputs};
    } else {
        blocks = {all_indices(model.input_dim)};
    }

    SampleChain chain;
    chain.method = "abc-slice";
    Rng rng(cfg.seed);
    Vector u = start_point(model, obs, rng);
    double lk = cfg.kernel.log_kernel(model.g_y(u), obs.values);
    constexpr double two_pi = 2.0 * std::numbers::pi;

    for (std::size_t it = 0; it < burn_in + n_samples; ++it) {
        bool moved = false;
        for (const auto& block : blocks) {
            Vector nu(block.size());
            for (double& x : nu) x = rng.normal();
            const double level = lk + std::log(rng.uniform_positive());
            double theta = two_pi * rng.uniform();
            double lo = theta - two_pi;
            double hi = theta;
            Vector prop = u;
            while (true) {
                const double c = std::cos(theta);
                const double s = std::sin(theta);
                for (std::size_t k = 0; k < block.size(); ++k) prop[block[k]] = u[block[k]] * c + nu[k] * s;
                const double lk_new = cfg.kernel.log_kernel(model.g_y(prop), obs.values);
                if (lk_new != neg_inf && lk_new >= level) {
                    u = prop;
                    lk = lk_new;
                    moved = moved || theta != 0.0;
                    break;
                }
                if (theta < 0.0) lo = theta;
                else hi = theta;
                // The bracket always contains theta = 0, the current state.
                if (hi - lo < 1e-12) break;
                theta = lo + (hi - lo) * rng.uniform();
            }
        }
        if (it >= burn_in) store(chain, model, u, moved);
    }
    chain.wall_seconds = seconds_since(start);
    return chain;
}

}  // namespace dgm
