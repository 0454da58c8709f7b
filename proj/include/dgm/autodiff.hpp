#pragma once

// Derivative engine for generator functions.
//
// Generators are written once as templates over the scalar type and are then
// instantiated for
//   double         plain evaluation
//   Dual<double>   forward tangents (jvp, forward-mode Jacobians)
//   Var            taped reverse mode (vjp, reverse-mode Jacobians)
//   Dual<Var>      reverse-over-forward (second-order contractions)
//
// A Tape is a flat list of nodes with at most two parents. It is owned by the
// call that records it and is never shared across threads.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <type_traits>
#include <vector>

#include "dgm/linalg.hpp"

namespace dgm::ad {

class Tape;

// A scalar recorded on a tape. Default-constructed and double-constructed Vars
// are constants (idx < 0) and carry no derivative information.
struct Var {
    double val = 0.0;
    int idx = -1;
    Tape* tape = nullptr;

    Var() = default;
    Var(double v) : val(v) {}  // NOLINT: implicit constants keep model code readable
    Var(double v, int i, Tape* t) : val(v), idx(i), tape(t) {}

    bool is_constant() const noexcept { return idx < 0; }

    Var& operator+=(const Var& o);
    Var& operator-=(const Var& o);
    Var& operator*=(const Var& o);
    Var& operator/=(const Var& o);
};

class Tape {
public:
    Tape() { nodes_.reserve(1024); }

    // Independent variables must be created before any other node so their
    // adjoints occupy the leading slots of gradient().
    Var variable(double v);
    Var unary(double v, const Var& a, double da);
    Var binary(double v, const Var& a, double da, const Var& b, double db);

    std::size_t size() const noexcept { return nodes_.size(); }
    // Drops all nodes but keeps the allocation; outstanding Vars become invalid.
    void clear() noexcept { nodes_.clear(); }

    // Adjoints of the first `n_inputs` nodes with respect to `out`.
    Vector gradient(const Var& out, std::size_t n_inputs) const;
    // Same, reusing a caller-owned adjoint buffer (resized to size()).
    void gradient(const Var& out, std::span<double> result, std::vector<double>& adjoint) const;
    // Adjoints of sum_k weights[k] * outputs[k] (a vector-Jacobian product).
    void gradient(std::span<const Var> outputs, std::span<const double> weights, std::span<double> result,
                  std::vector<double>& adjoint) const;

private:
    struct Node {
        int a;
        int b;
        double da;
        double db;
    };
    std::vector<Node> nodes_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var tanh(const Var& a);
Var pow(const Var& a, double p);

inline bool operator<(const Var& a, const Var& b) { return a.val < b.val; }
inline bool operator>(const Var& a, const Var& b) { return a.val > b.val; }

// Forward-mode dual number over an arbitrary scalar.
template <class S>
struct Dual {
    S v{};
    S d{};

    Dual() = default;
    Dual(double x) : v(x), d(0.0) {}  // NOLINT
    Dual(S value, S tangent) : v(std::move(value)), d(std::move(tangent)) {}

    Dual& operator+=(const Dual& o) { return *this = *this + o; }
    Dual& operator-=(const Dual& o) { return *this = *this - o; }
    Dual& operator*=(const Dual& o) { return *this = *this * o; }
    Dual& operator/=(const Dual& o) { return *this = *this / o; }
};

template <class S>
Dual<S> operator+(const Dual<S>& a, const Dual<S>& b) { return {a.v + b.v, a.d + b.d}; }
template <class S>
Dual<S> operator-(const Dual<S>& a, const Dual<S>& b) { return {a.v - b.v, a.d - b.d}; }
template <class S>
Dual<S> operator-(const Dual<S>& a) { return {-a.v, -a.d}; }
template <class S>
Dual<S> operator*(const Dual<S>& a, const Dual<S>& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
template <class S>
Dual<S> operator/(const Dual<S>& a, const Dual<S>& b) {
    S q = a.v / b.v;
    return {q, (a.d - q * b.d) / b.v};
}
template <class S>
Dual<S> operator+(const Dual<S>& a, double b) { return {a.v + b, a.d}; }
template <class S>
Dual<S> operator+(double a, const Dual<S>& b) { return {a + b.v, b.d}; }
template <class S>
Dual<S> operator-(const Dual<S>& a, double b) { return {a.v - b, a.d}; }
template <class S>
Dual<S> operator-(double a, const Dual<S>& b) { return {a - b.v, -b.d}; }
template <class S>
Dual<S> operator*(const Dual<S>& a, double b) { return {a.v * b, a.d * b}; }
template <class S>
Dual<S> operator*(double a, const Dual<S>& b) { return {a * b.v, a * b.d}; }
template <class S>
Dual<S> operator/(const Dual<S>& a, double b) { return {a.v / b, a.d / b}; }
template <class S>
Dual<S> operator/(double a, const Dual<S>& b) { return Dual<S>(a) / b; }

template <class S>
Dual<S> exp(const Dual<S>& a) {
    using std::exp;
    S e = exp(a.v);
    return {e, e * a.d};
}
template <class S>
Dual<S> log(const Dual<S>& a) {
    using std::log;
    return {log(a.v), a.d / a.v};
}
template <class S>
Dual<S> sqrt(const Dual<S>& a) {
    using std::sqrt;
    S r = sqrt(a.v);
    return {r, a.d / (2.0 * r)};
}
template <class S>
Dual<S> sin(const Dual<S>& a) {
    using std::cos;
    using std::sin;
    return {sin(a.v), cos(a.v) * a.d};
}
template <class S>
Dual<S> cos(const Dual<S>& a) {
    using std::cos;
    using std::sin;
    return {cos(a.v), -(sin(a.v) * a.d)};
}
template <class S>
Dual<S> tanh(const Dual<S>& a) {
    using std::tanh;
    S t = tanh(a.v);
    return {t, (1.0 - t * t) * a.d};
}
template <class S>
Dual<S> pow(const Dual<S>& a, double p) {
    using std::pow;
    return {pow(a.v, p), p * pow(a.v, p - 1.0) * a.d};
}

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.val; }
template <class S>
double value_of(const Dual<S>& x) { return value_of(x.v); }

template <class S>
bool operator<(const Dual<S>& a, const Dual<S>& b) { return value_of(a) < value_of(b); }
template <class S>
bool operator>(const Dual<S>& a, const Dual<S>& b) { return value_of(a) > value_of(b); }

// Scalar type of a `std::span<const T>` argument inside a generic generator.
template <class Span>
using scalar_of = std::remove_cv_t<typename Span::element_type>;

}  // namespace dgm::ad

namespace dgm {

enum class DiffMode { taped_reverse, forward_dual, analytic };

// A vector-valued function R^M -> R^N with derivative access.
class DiffFunction {
public:
    template <class T>
    using Impl = std::function<std::vector<T>(std::span<const T>)>;
    using JacobianFn = std::function<DenseMatrix(std::span<const double>)>;
    using ContractionFn = std::function<Vector(std::span<const double>, const DenseMatrix&)>;

    DiffFunction() = default;

    // `f` must be callable as f(std::span<const T>) -> std::vector<T> for each
    // of the four scalar types listed at the top of this header.
    template <class F>
    static DiffFunction from_generic(std::size_t input_dim, std::size_t output_dim, F f,
                                     DiffMode mode = DiffMode::taped_reverse) {
        DiffFunction fn;
        fn.input_dim_ = input_dim;
        fn.output_dim_ = output_dim;
        fn.mode_ = mode;
        fn.eval_double_ = [f](std::span<const double> u) { return f(u); };
        fn.eval_dual_ = [f](std::span<const ad::Dual<double>> u) { return f(u); };
        fn.eval_var_ = [f](std::span<const ad::Var> u) { return f(u); };
        fn.eval_dual_var_ = [f](std::span<const ad::Dual<ad::Var>> u) { return f(u); };
        return fn;
    }

    // Registers hand-written derivatives. The contraction closure is optional;
    // without it second_contraction() falls back to reverse-over-forward.
    DiffFunction with_analytic(JacobianFn jacobian, ContractionFn contraction = {}) const;
    DiffFunction with_mode(DiffMode mode) const;

    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t output_dim() const noexcept { return output_dim_; }
    DiffMode mode() const noexcept { return mode_; }
    bool has_analytic_jacobian() const noexcept { return static_cast<bool>(jacobian_); }
    bool has_analytic_contraction() const noexcept { return static_cast<bool>(contraction_); }

    Vector operator()(std::span<const double> u) const;

    std::vector<ad::Dual<double>> eval(std::span<const ad::Dual<double>> u) const { return eval_dual_(u); }
    std::vector<ad::Var> eval(std::span<const ad::Var> u) const { return eval_var_(u); }
    std::vector<ad::Dual<ad::Var>> eval(std::span<const ad::Dual<ad::Var>> u) const {
        return eval_dual_var_(u);
    }

    const JacobianFn& analytic_jacobian() const noexcept { return jacobian_; }
    const ContractionFn& analytic_contraction() const noexcept { return contraction_; }

private:
    std::size_t input_dim_ = 0;
    std::size_t output_dim_ = 0;
    DiffMode mode_ = DiffMode::taped_reverse;
    Impl<double> eval_double_;
    Impl<ad::Dual<double>> eval_dual_;
    Impl<ad::Var> eval_var_;
    Impl<ad::Dual<ad::Var>> eval_dual_var_;
    JacobianFn jacobian_;
    ContractionFn contraction_;
};

// Entry (i, j) = d f_i / d u_j. Throws NonFiniteDerivative on NaN/Inf entries.
DenseMatrix jacobian(const DiffFunction& f, std::span<const double> u);

// Same, forcing a specific engine regardless of f.mode(). Used for cross-checks.
DenseMatrix jacobian(const DiffFunction& f, std::span<const double> u, DiffMode mode);

// (df/du) * tangent
Vector jvp(const DiffFunction& f, std::span<const double> u, std::span<const double> tangent);

// weights^T * (df/du)
Vector vjp(const DiffFunction& f, std::span<const double> u, std::span<const double> weights);

// r_i = sum_{k,j} d^2 f_k / (du_i du_j) * W(k, j), with W of shape output_dim x input_dim.
Vector second_contraction(const DiffFunction& f, std::span<const double> u, const DenseMatrix& w);

// Reverse-over-forward route regardless of registered closures.
Vector second_contraction_taped(const DiffFunction& f, std::span<const double> u, const DenseMatrix& w);

}  // namespace dgm
