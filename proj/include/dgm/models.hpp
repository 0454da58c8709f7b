#pragma once

// Bundled generators: a stochastic Lotka-Volterra simulator and three small
// models with closed-form or quadrature posteriors used as test oracles.

#include <array>
#include <span>

#include "dgm/model.hpp"

namespace dgm {

struct LotkaVolterraSpec {
    std::size_t n_steps = 25;
    double dt_sim = 1.0;
    std::array<double, 2> y0{100.0, 100.0};
    double prior_mu = -2.0;
    double prior_sigma = 1.0;

    void validate() const;
    std::size_t input_dim() const { return 4 + 2 * n_steps; }
    bool operator==(const LotkaVolterraSpec&) const = default;
};

// Prey growth, predation, predator death, predator growth.
inline constexpr std::array<double, 4> lotka_volterra_reference_params{0.4, 0.005, 0.05, 0.001};

// Inputs: u[0..3] map to rates exp(mu + sigma u_i); u[4 + 2t], u[5 + 2t] are the
// standard-normal increments of step t, scaled by sqrt(dt_sim). Euler-Maruyama:
//   y1' = y1 + dt (z1 y1 - z2 y1 y2) + sqrt(dt) n1
//   y2' = y2 + dt (-z3 y2 + z4 y1 y2) + sqrt(dt) n2
// g_y is the flattened trajectory (y1(1), y2(1), ..., y1(T), y2(T)); g_z the
// four log-rates.
GeneratorModel lotka_volterra_model(const LotkaVolterraSpec& spec);

// Inputs that reproduce the given rates and noise increments.
Vector lotka_volterra_inputs(const LotkaVolterraSpec& spec, std::span<const double> rates,
                             std::span<const double> noise);

// Noise increments that make the simulator hit `trajectory` exactly for the
// given parameter inputs u[0..3].
Vector lotka_volterra_back_solve(const LotkaVolterraSpec& spec, std::span<const double> param_inputs,
                                 std::span<const double> trajectory);

// u ~ N(0, I_M), y = w^T u, z = u_1.
GeneratorModel linear_gaussian_model(const Vector& weights);

// u ~ N(0, I_2), y = |u|^2, z = u. Observe y = radius^2.
GeneratorModel circle_model(double radius);

// u = (u_z, u_y) ~ N(0, I_2), z = u_z, y = z^3 + 0.5 u_y.
GeneratorModel toy1d_model();

// Posterior mean of z under toy1d given y_obs by trapezoid quadrature on
// [-6, 6]. kernel_sd > 0 adds a Gaussian ABC kernel of that width.
double toy1d_grid_posterior_mean(double y_obs, double kernel_sd = 0.0, std::size_t points = 4096);

}  // namespace dgm
