#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dgm/chain.hpp"

namespace dgm {

struct EssResult {
    double ess = 0.0;
    // Zero-variance input; ess is 0.
    bool degenerate = false;
};

// Geyer's initial positive sequence estimator: S / (1 + 2 sum_k rho_k), the sum
// stopping before the first lag pair (rho_2m + rho_2m+1) that is not positive.
// Autocorrelations come from an FFT. Clipped to (0, S]. Requires S >= 10 and
// finite values.
EssResult effective_sample_size(std::span<const double> series);

// Normalized autocorrelations rho_0 = 1, rho_1, ..., rho_{S-1}.
std::vector<double> autocorrelation(std::span<const double> series);

struct ChainStats {
    std::vector<std::string> names;
    std::vector<double> ess;
    std::vector<double> ess_per_sec;
    std::vector<double> mean;
    std::vector<double> stderr_;
    std::vector<bool> degenerate;
    double accept_rate = 0.0;
    double wall_seconds = 0.0;
    std::size_t n_samples = 0;
};

// Per-coordinate stats of chain.z. Weighted chains use the weighted mean and
// the Kish effective size.
ChainStats chain_stats(const SampleChain& chain, const std::vector<std::string>& names);

struct RmsePoint {
    std::size_t n = 0;
    double rmse = 0.0;
};

// RMSE between the mean of the first n samples and `truth`, for each n.
std::vector<RmsePoint> posterior_rmse(const std::vector<Vector>& z, std::span<const double> truth,
                                      std::span<const std::size_t> prefix_sizes);

// Roughly log-spaced prefix sizes 10, 20, 50, 100, ... capped by and ending at n.
std::vector<std::size_t> default_prefix_sizes(std::size_t n);

struct KsResult {
    double statistic = 0.0;
    double p_value = 0.0;
};

// One-sample Kolmogorov-Smirnov test against `cdf`. `effective_n` (defaults
// to the sample count) sets the reference distribution, so correlated chains
// can be tested at their effective sample size.
KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf,
                 double effective_n = 0.0);

// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

}  // namespace dgm
