#pragma once

#include <stdexcept>
#include <string>

namespace dgm {

struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Raised when a Gram matrix cannot be factorized even after the jitter retry.
// In the sampler this means the constraint Jacobian lost full row rank.
struct NotPositiveDefinite : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NonFiniteDerivative : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InitializationFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProjectionFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The reverse sub-step did not land back on the starting point.
struct NonReversibleStep : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    ConfigError(const std::string& msg, int line)
        : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

}  // namespace dgm
