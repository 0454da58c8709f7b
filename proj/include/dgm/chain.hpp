#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dgm/linalg.hpp"

namespace dgm {

struct TransitionRecord {
    bool accepted = false;
    // Change in the Hamiltonian over the proposal; NaN for samplers without one.
    double delta_h = 0.0;
    std::size_t projection_iters = 0;
    bool fallback_used = false;
    bool nonreversible_rejected = false;
    bool projection_failed = false;
};

// Ordered post-burn-in samples. `z` holds g_z of each stored input; `weights`
// is filled only by importance-weighted samplers.
struct SampleChain {
    std::string method;
    std::vector<Vector> u;
    std::vector<Vector> p;
    std::vector<Vector> z;
    std::vector<double> weights;
    std::vector<TransitionRecord> records;
    double wall_seconds = 0.0;
    // Proposals attempted / accepted (for rejection sampling: draws / hits).
    std::size_t attempts = 0;
    std::size_t accepted = 0;

    std::size_t size() const noexcept { return z.size(); }
    double accept_rate() const {
        return attempts == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(attempts);
    }
};

}  // namespace dgm
