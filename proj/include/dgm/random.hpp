#pragma once

#include <cstdint>
#include <random>

#include "dgm/linalg.hpp"

namespace dgm {

// Bit-reproducible random stream: std::mt19937_64 (fully specified by the
// standard) for raw bits, 53-bit uniforms, and Box-Muller normals. The
// std::*_distribution classes are avoided because their algorithms are
// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Stream for chain `index` of an experiment seeded with `seed`.
    static Rng for_chain(std::uint64_t seed, std::uint64_t index) { return Rng(seed + index); }

    // Uniform on [0, 1).
    double uniform();
    // Uniform on (0, 1], safe to pass to log().
    double uniform_positive() { return 1.0 - uniform(); }
    double normal();
    Vector normal_vector(std::size_t n);
    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace dgm
