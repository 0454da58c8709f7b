#pragma once

// The differentiable generative model contract: inputs u ~ rho are mapped to
// observed outputs y = g_y(u) and latent outputs z = g_z(u). Conditioning on
// y = y_obs restricts u to the manifold { u : g_y(u) - y_obs = 0 }.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dgm/autodiff.hpp"
#include "dgm/linalg.hpp"
#include "dgm/random.hpp"

namespace dgm {

struct NoiseStructure {
    enum class Kind { dense, elementwise, autoregressive };

    Kind kind = Kind::dense;
    // Inputs feeding every observed output (e.g. model parameters).
    std::vector<std::size_t> global_indices;
    // One local input per observed output, in generation order, so that
    // d c / d n is diagonal (elementwise) or lower-triangular (autoregressive).
    std::vector<std::size_t> noise_indices;
};

// For directed models z is generated from `latent_inputs` alone and y from z
// plus `noise_inputs`.
struct DirectedSplit {
    std::vector<std::size_t> latent_inputs;
    std::vector<std::size_t> noise_inputs;
};

struct BaseDensity {
    std::function<double(std::span<const double>)> log_density;
    std::function<Vector(std::span<const double>)> gradient;
    std::function<Vector(Rng&)> sample;
    // True when rho is N(0, I); required by the elliptical slice baseline.
    bool standard_normal = false;

    static BaseDensity standard_normal_of(std::size_t dim);
};

struct Observation {
    Vector values;
    std::string label;
};

struct GeneratorModel {
    using InitSolver = std::function<Vector(const Observation&, std::uint64_t seed)>;

    std::string name;
    std::size_t input_dim = 0;
    std::size_t observed_dim = 0;
    std::size_t latent_dim = 0;
    DiffFunction g_y;
    DiffFunction g_z;
    BaseDensity base;
    NoiseStructure structure;
    std::optional<DirectedSplit> directed;
    InitSolver init_solver;
    std::vector<std::string> latent_names;

    // Throws std::invalid_argument on inconsistent dimensions or index sets.
    void validate() const;
};

// Cached constraint Jacobian J and Cholesky factor L of J J^T at some u.
struct ConstraintFactor {
    DenseMatrix jacobian;
    LowerTriangular factor;
};

// g_y(u) - y_obs
Vector constraint(const GeneratorModel& model, const Observation& obs, std::span<const double> u);

// J = dc/du and L = chol(J J^T). Uses the low-rank update path when the model
// declares elementwise or autoregressive noise structure.
ConstraintFactor constraint_jacobian(const GeneratorModel& model, const Observation& obs,
                                     std::span<const double> u);

// Cholesky factor of J J^T built from the triangular noise block of J followed
// by one rank-1 update per global input column. O(L N^2) instead of O(N^3).
LowerTriangular structured_gram_factor(const DenseMatrix& jacobian, const NoiseStructure& structure);

struct InitOptions {
    double tolerance = 1e-9;
    int max_restarts = 50;
    int max_newton_iters = 100;
};

// Finds u with max |c(u)| <= tolerance. Uses the model's init_solver when
// present; otherwise samples u ~ rho and runs damped minimum-norm Newton on all
// inputs, falling back to Newton on the N_y inputs whose Jacobian columns have
// the largest norms. Throws InitializationFailed after max_restarts.
Vector find_initial(const GeneratorModel& model, const Observation& obs, std::uint64_t seed,
                    const InitOptions& options = {});

}  // namespace dgm
