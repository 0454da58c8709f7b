#include "dgm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dgm/errors.hpp"

namespace dgm {

BaseDensity BaseDensity::standard_normal_of(std::size_t dim) {
    BaseDensity b;
    b.log_density = [](std::span<const double> u) { return -0.5 * dot(u, u); };
    b.gradient = [](std::span<const double> u) {
        Vector g(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) g[i] = -u[i];
        return g;
    };
    b.sample = [dim](Rng& rng) { return rng.normal_vector(dim); };
    b.standard_normal = true;
    return b;
}

void GeneratorModel::validate() const {
    if (observed_dim > input_dim)
        throw std::invalid_argument(name + ": more observed outputs than inputs");
    if (g_y.input_dim() != input_dim || g_y.output_dim() != observed_dim)
        throw std::invalid_argument(name + ": g_y shape mismatch");
    if (g_z.input_dim() != input_dim || g_z.output_dim() != latent_dim)
        throw std::invalid_argument(name + ": g_z shape mismatch");
    if (!base.log_density || !base.gradient || !base.sample)
        throw std::invalid_argument(name + ": incomplete base density");
    if (structure.kind != NoiseStructure::Kind::dense) {
        if (structure.noise_indices.size() != observed_dim)
            throw std::invalid_argument(name + ": need one noise input per observed output");
        std::vector<std::size_t> all = structure.global_indices;
        all.insert(all.end(), structure.noise_indices.begin(), structure.noise_indices.end());
        std::sort(all.begin(), all.end());
        if (all.size() != input_dim || std::adjacent_find(all.begin(), all.end()) != all.end() ||
            (!all.empty() && all.back() >= input_dim))
            throw std::invalid_argument(name + ": global and noise indices must partition the inputs");
    }
}

Vector constraint(const GeneratorModel& model, const Observation& obs, std::span<const double> u) {
    if (u.size() != model.input_dim) throw DimensionMismatch("constraint: input length mismatch");
    if (obs.values.size() != model.observed_dim)
        throw DimensionMismatch("constraint: observation length mismatch");
    Vector c = model.g_y(u);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= obs.values[i];
    return c;
}

LowerTriangular structured_gram_factor(const DenseMatrix& jacobian, const NoiseStructure& structure) {
    const std::size_t n = jacobian.rows();
    if (structure.noise_indices.size() != n)
        throw DimensionMismatch("structured_gram_factor: noise index count must equal rows");
    const bool diagonal = structure.kind == NoiseStructure::Kind::elementwise;

    // The noise block is already triangular; flipping column signs makes its
    // diagonal positive without changing L L^T.
    LowerTriangular l(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t col = structure.noise_indices[k];
        const double d = jacobian(k, col);
        if (d == 0.0 || !std::isfinite(d))
            throw NotPositiveDefinite("structured_gram_factor: zero diagonal in noise block");
        const double sign = d > 0.0 ? 1.0 : -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = jacobian(i, col);
            if ((i < k || (diagonal && i != k)) && v != 0.0)
                throw std::invalid_argument("structured_gram_factor: noise block violates declared structure");
            if (i >= k) l(i, k) = sign * v;
        }
    }
    Vector column(n);
    for (std::size_t g : structure.global_indices) {
        for (std::size_t i = 0; i < n; ++i) column[i] = jacobian(i, g);
        l = chol_rank1_update(std::move(l), column);
    }
    return l;
}

ConstraintFactor constraint_jacobian(const GeneratorModel& model, const Observation& obs,
                                     std::span<const double> u) {
    if (u.size() != model.input_dim) throw DimensionMismatch("constraint_jacobian: input length mismatch");
    (void)obs;  // J does not depend on the observed values
    DenseMatrix j = jacobian(model.g_y, u);
    LowerTriangular l = model.structure.kind == NoiseStructure::Kind::dense
                            ? cholesky(gram(j))
                            : structured_gram_factor(j, model.structure);
    return {std::move(j), std::move(l)};
}

namespace {

double half_sq(const Vector& c) { return 0.5 * dot(c, c); }

// Damped Newton on the residual. `direction` maps (u, c) to a step d with
// J d = c (minimum-norm or restricted to a coordinate subset).
template <class Direction>
bool newton_solve(const GeneratorModel& model, const Observation& obs, Vector& u, const InitOptions& opt,
                  Direction&& direction) {
    Vector c = constraint(model, obs, u);
    for (int it = 0; it < opt.max_newton_iters; ++it) {
        if (!(max_abs(c) > opt.tolerance)) return true;
        Vector d;
        try {
            d = direction(u, c);
        } catch (const std::runtime_error&) {
            return false;
        }
        const double f0 = half_sq(c);
        double alpha = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 40; ++ls, alpha *= 0.5) {
            Vector trial = u;
            for (std::size_t i = 0; i < u.size(); ++i) trial[i] -= alpha * d[i];
            Vector ct = constraint(model, obs, trial);
            const double f1 = half_sq(ct);
            if (std::isfinite(f1) && f1 <= (1.0 - 1e-4 * alpha) * f0) {
                u = std::move(trial);
                c = std::move(ct);
                moved = true;
                break;
            }
        }
        if (!moved) return false;
    }
    return !(max_abs(c) > opt.tolerance);
}

bool min_norm_newton(const GeneratorModel& model, const Observation& obs, Vector& u, const InitOptions& opt) {
    return newton_solve(model, obs, u, opt, [&](const Vector& x, const Vector& c) {
        const DenseMatrix j = jacobian(model.g_y, x);
        const LowerTriangular l = cholesky(gram(j));
        const Vector w = solve_triangular(l, solve_triangular(l, c, false), true);
        return matvec_transposed(j, w);
    });
}

bool subset_newton(const GeneratorModel& model, const Observation& obs, Vector& u, const InitOptions& opt) {
    const std::size_t n = model.observed_dim;
    const std::size_t m = model.input_dim;
    std::vector<std::size_t> cols(m);
    try {
        const DenseMatrix j0 = jacobian(model.g_y, u);
        std::vector<double> norms(m, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < m; ++k) norms[k] += j0(i, k) * j0(i, k);
        std::iota(cols.begin(), cols.end(), std::size_t{0});
        std::stable_sort(cols.begin(), cols.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
        cols.resize(n);
    } catch (const std::runtime_error&) {
        return false;
    }
    return newton_solve(model, obs, u, opt, [&](const Vector& x, const Vector& c) {
        const DenseMatrix j = jacobian(model.g_y, x);
        DenseMatrix sub(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k) sub(i, k) = j(i, cols[k]);
        const Vector dsub = solve_lu(sub, c);
        Vector d(m, 0.0);
        for (std::size_t k = 0; k < n; ++k) d[cols[k]] = dsub[k];
        return d;
    });
}

}  // namespace

Vector find_initial(const GeneratorModel& model, const Observation& obs, std::uint64_t seed,
                    const InitOptions& options) {
    if (obs.values.size() != model.observed_dim)
        throw DimensionMismatch("find_initial: observation length mismatch");

    if (model.init_solver) {
        for (int r = 0; r < options.max_restarts; ++r) {
            Vector u = model.init_solver(obs, seed + static_cast<std::uint64_t>(r));
            if (u.size() != model.input_dim) throw DimensionMismatch("find_initial: init_solver returned wrong length");
            if (!(max_abs(constraint(model, obs, u)) > options.tolerance)) return u;
            if (min_norm_newton(model, obs, u, options)) return u;
        }
        throw InitializationFailed(model.name + ": init_solver did not reach the constraint tolerance");
    }

    Rng rng(seed);
    for (int r = 0; r < options.max_restarts; ++r) {
        const Vector start = model.base.sample(rng);
        Vector u = start;
        if (min_norm_newton(model, obs, u, options)) return u;
        u = start;
        if (subset_newton(model, obs, u, options)) return u;
    }
    throw InitializationFailed(model.name + ": no constraint-satisfying input found after " +
                               std::to_string(options.max_restarts) + " restarts");
}

}  // namespace dgm
