#include "dgm/diagnostics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "dgm/errors.hpp"

namespace dgm {

namespace {

// FFTW's planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

std::size_t next_fast_size(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace

std::vector<double> autocorrelation(std::span<const double> series) {
    const std::size_t s = series.size();
    if (s == 0) return {};
    double mean = 0.0;
    for (double x : series) mean += x;
    mean /= static_cast<double>(s);

    const std::size_t n = next_fast_size(2 * s);
    const std::size_t nc = n / 2 + 1;
    double* in = fftw_alloc_real(n);
    fftw_complex* freq = fftw_alloc_complex(nc);
    fftw_plan forward;
    fftw_plan backward;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, freq, FFTW_ESTIMATE);
        backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), freq, in, FFTW_ESTIMATE);
    }
    for (std::size_t i = 0; i < n; ++i) in[i] = i < s ? series[i] - mean : 0.0;
    fftw_execute(forward);
    for (std::size_t k = 0; k < nc; ++k) {
        const double re = freq[k][0];
        const double im = freq[k][1];
        freq[k][0] = re * re + im * im;
        freq[k][1] = 0.0;
    }
    fftw_execute(backward);

    std::vector<double> rho(s, 0.0);
    const double c0 = in[0];
    if (c0 > 0.0)
        for (std::size_t k = 0; k < s; ++k) rho[k] = in[k] / c0;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(forward);
        fftw_destroy_plan(backward);
    }
    fftw_free(in);
    fftw_free(freq);
    return rho;
}

EssResult effective_sample_size(std::span<const double> series) {
    const std::size_t s = series.size();
    if (s < 10) throw std::invalid_argument("effective_sample_size: need at least 10 values");
    for (double x : series)
        if (!std::isfinite(x)) throw std::invalid_argument("effective_sample_size: non-finite value");
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    if (*lo == *hi) return {0.0, true};

    const std::vector<double> rho = autocorrelation(series);
    if (rho[0] == 0.0) return {0.0, true};
    double tau = -1.0;
    for (std::size_t m = 0; 2 * m + 1 < s; ++m) {
        const double pair = rho[2 * m] + rho[2 * m + 1];
        if (!(pair > 0.0)) break;
        tau += 2.0 * pair;
    }
    const double n = static_cast<double>(s);
    if (!(tau > 0.0) || n / tau > n) return {n, false};
    return {n / tau, false};
}

ChainStats chain_stats(const SampleChain& chain, const std::vector<std::string>& names) {
    ChainStats st;
    st.names = names;
    st.accept_rate = chain.accept_rate();
    st.wall_seconds = chain.wall_seconds;
    st.n_samples = chain.size();
    const std::size_t d = chain.z.empty() ? names.size() : chain.z.front().size();
    if (!chain.z.empty() && d != names.size()) throw DimensionMismatch("chain_stats: name count mismatch");
    st.ess.assign(d, 0.0);
    st.ess_per_sec.assign(d, 0.0);
    st.mean.assign(d, 0.0);
    st.stderr_.assign(d, 0.0);
    st.degenerate.assign(d, false);
    if (chain.z.empty()) return st;

    const bool weighted = !chain.weights.empty();
    const std::size_t s = chain.size();
    double wsum = 0.0;
    double wsq = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
        const double w = weighted ? chain.weights[i] : 1.0;
        wsum += w;
        wsq += w * w;
    }
    Vector column(s);
    for (std::size_t k = 0; k < d; ++k) {
        double mean = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            column[i] = chain.z[i][k];
            mean += (weighted ? chain.weights[i] : 1.0) * column[i];
        }
        mean = wsum > 0.0 ? mean / wsum : 0.0;
        double var = 0.0;
        for (std::size_t i = 0; i < s; ++i) {
            const double r = column[i] - mean;
            var += (weighted ? chain.weights[i] : 1.0) * r * r;
        }
        var = wsum > 0.0 ? var / wsum : 0.0;
        st.mean[k] = mean;

        double ess = 0.0;
        if (weighted) {
            ess = wsq > 0.0 ? wsum * wsum / wsq : 0.0;
            st.degenerate[k] = var == 0.0;
        } else if (s >= 10) {
            const EssResult e = effective_sample_size(column);
            ess = e.ess;
            st.degenerate[k] = e.degenerate;
        } else {
            ess = static_cast<double>(s);
        }
        st.ess[k] = ess;
        st.ess_per_sec[k] = chain.wall_seconds > 0.0 ? ess / chain.wall_seconds : 0.0;
        st.stderr_[k] = ess > 0.0 ? std::sqrt(var / ess) : 0.0;
    }
    return st;
}

std::vector<RmsePoint> posterior_rmse(const std::vector<Vector>& z, std::span<const double> truth,
                                      std::span<const std::size_t> prefix_sizes) {
    const std::size_t d = truth.size();
    for (const Vector& v : z)
        if (v.size() != d) throw DimensionMismatch("posterior_rmse: truth dimension mismatch");
    std::vector<RmsePoint> curve;
    Vector sum(d, 0.0);
    std::size_t taken = 0;
    for (std::size_t n : prefix_sizes) {
        if (n == 0 || n > z.size()) throw std::invalid_argument("posterior_rmse: prefix size out of range");
        if (n < taken) throw std::invalid_argument("posterior_rmse: prefix sizes must be non-decreasing");
        for (; taken < n; ++taken)
            for (std::size_t k = 0; k < d; ++k) sum[k] += z[taken][k];
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double e = sum[k] / static_cast<double>(n) - truth[k];
            sq += e * e;
        }
        curve.push_back({n, std::sqrt(sq / static_cast<double>(d))});
    }
    return curve;
}

std::vector<std::size_t> default_prefix_sizes(std::size_t n) {
    std::vector<std::size_t> sizes;
    for (std::size_t decade = 10; decade < n; decade *= 10)
        for (std::size_t f : {1, 2, 5})
            if (decade * f < n) sizes.push_back(decade * f);
    if (n > 0) sizes.push_back(n);
    return sizes;
}

double kolmogorov_survival(double lambda) {
    if (!(lambda > 0.0)) return 1.0;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_test(std::span<const double> samples, const std::function<double(double)>& cdf, double effective_n) {
    if (samples.empty()) throw std::invalid_argument("ks_test: no samples");
    std::vector<double> x(samples.begin(), samples.end());
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    const double ne = effective_n > 0.0 ? effective_n : n;
    const double root = std::sqrt(ne);
    // Stephens' finite-sample correction to the asymptotic distribution.
    return {d, kolmogorov_survival((root + 0.12 + 0.11 / root) * d)};
}

}  // namespace dgm
