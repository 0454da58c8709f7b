#include "dgm/target.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dgm/errors.hpp"

namespace dgm {

double log_target_value(const GeneratorModel& model, std::span<const double> u, const LowerTriangular& factor) {
    return model.base.log_density(u) - factor.log_diag_sum();
}

DenseMatrix gram_inverse_times_jacobian(const DenseMatrix& jacobian, const LowerTriangular& factor) {
    if (factor.dim() != jacobian.rows()) throw DimensionMismatch("gram_inverse_times_jacobian: factor/Jacobian mismatch");
    return solve_triangular(factor, solve_triangular(factor, jacobian, false), true);
}

DenseMatrix gram_inverse_times_jacobian(const DenseMatrix& jacobian, const LowerTriangular& factor,
                                        std::span<const std::size_t> row_extent) {
    const std::size_t n = factor.dim();
    const std::size_t m = jacobian.cols();
    if (n != jacobian.rows() || row_extent.size() != n)
        throw DimensionMismatch("gram_inverse_times_jacobian: factor/Jacobian/extent mismatch");
    DenseMatrix x = solve_triangular(factor, jacobian, false);
    for (std::size_t i = n; i-- > 0;) {
        const std::size_t e = std::min(row_extent[i], m);
        if (i + 1 < n && e > row_extent[i + 1]) throw std::invalid_argument("row_extent must be non-decreasing");
        double* xi = &x(i, 0);
        for (std::size_t k = i + 1; k < n; ++k) {
            const double lki = factor(k, i);
            if (lki == 0.0) continue;
            const double* xk = &x(k, 0);
            for (std::size_t j = 0; j < e; ++j) xi[j] -= lki * xk[j];
        }
        const double inv = 1.0 / factor(i, i);
        for (std::size_t j = 0; j < e; ++j) xi[j] *= inv;
        for (std::size_t j = e; j < m; ++j) xi[j] = 0.0;
    }
    return x;
}

std::vector<std::size_t> structural_row_extent(const GeneratorModel& model) {
    const std::size_t n = model.observed_dim;
    const std::size_t m = model.input_dim;
    const NoiseStructure& s = model.structure;
    if (s.kind == NoiseStructure::Kind::dense || s.noise_indices.size() != n) return std::vector<std::size_t>(n, m);
    std::size_t reach = 0;
    for (std::size_t g : s.global_indices) reach = std::max(reach, g + 1);
    std::vector<std::size_t> ext(n);
    for (std::size_t i = 0; i < n; ++i) {
        reach = std::max(reach, s.noise_indices[i] + 1);
        ext[i] = reach;
    }
    return ext;
}

Vector grad_log_target(const GeneratorModel& model, const Observation& obs, std::span<const double> u,
                       const ConstraintFactor& cached) {
    (void)obs;
    Vector g = model.base.gradient(u);
    const DenseMatrix w =
        gram_inverse_times_jacobian(cached.jacobian, cached.factor, structural_row_extent(model));
    const Vector r = second_contraction(model.g_y, u, w);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= r[i];
    for (double x : g)
        if (!std::isfinite(x)) throw NonFiniteDerivative("grad_log_target: non-finite gradient");
    return g;
}

TargetEvaluation log_target(const GeneratorModel& model, const Observation& obs, std::span<const double> u,
                            const ConstraintFactor* cached) {
    ConstraintFactor f = cached ? *cached : constraint_jacobian(model, obs, u);
    TargetEvaluation e;
    e.log_pi = log_target_value(model, u, f.factor);
    e.grad_log_pi = grad_log_target(model, obs, u, f);
    e.jacobian = std::move(f.jacobian);
    e.factor = std::move(f.factor);
    return e;
}

}  // namespace dgm
