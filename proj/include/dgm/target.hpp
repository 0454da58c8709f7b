#pragma once

// Density of the conditioned inputs with respect to the surface measure on the
// constraint manifold:
//
//   log pi(u) = log rho(u) - 1/2 log det(J J^T) = log rho(u) - sum_i log L_ii
//
// up to an additive constant that is never computed.

#include <span>

#include "dgm/model.hpp"

namespace dgm {

struct TargetEvaluation {
    double log_pi = 0.0;
    Vector grad_log_pi;
    DenseMatrix jacobian;
    LowerTriangular factor;
};

// Value only, from a factor already computed at u.
double log_target_value(const GeneratorModel& model, std::span<const double> u, const LowerTriangular& factor);

// Gradient via the trace identity: grad log rho(u) minus the second-order
// contraction of g_y against W = L^{-T} L^{-1} J.
Vector grad_log_target(const GeneratorModel& model, const Observation& obs, std::span<const double> u,
                       const ConstraintFactor& cached);

// Full evaluation. Recomputes (J, L) unless `cached` is supplied, in which case
// it must belong to u.
TargetEvaluation log_target(const GeneratorModel& model, const Observation& obs, std::span<const double> u,
                            const ConstraintFactor* cached = nullptr);

// L^{-T} L^{-1} J by two blocked triangular solves.
DenseMatrix gram_inverse_times_jacobian(const DenseMatrix& jacobian, const LowerTriangular& factor);

// Same, but row i of the result is only formed for columns below
// row_extent[i] and is zero beyond. Enough for the contraction when J_ij is
// structurally zero past the extent. Extents must be non-decreasing.
DenseMatrix gram_inverse_times_jacobian(const DenseMatrix& jacobian, const LowerTriangular& factor,
                                        std::span<const std::size_t> row_extent);

// Per-row column extent of J implied by the declared noise structure, made
// non-decreasing; all m for dense models.
std::vector<std::size_t> structural_row_extent(const GeneratorModel& model);

}  // namespace dgm
