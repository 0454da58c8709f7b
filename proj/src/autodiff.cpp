#include "dgm/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dgm/errors.hpp"

namespace dgm::ad {

Var Tape::variable(double v) {
    nodes_.push_back({-1, -1, 0.0, 0.0});
    return {v, static_cast<int>(nodes_.size() - 1), this};
}

Var Tape::unary(double v, const Var& a, double da) {
    if (a.is_constant()) return Var(v);
    nodes_.push_back({a.idx, -1, da, 0.0});
    return {v, static_cast<int>(nodes_.size() - 1), this};
}

Var Tape::binary(double v, const Var& a, double da, const Var& b, double db) {
    if (a.is_constant()) return unary(v, b, db);
    if (b.is_constant()) return unary(v, a, da);
    nodes_.push_back({a.idx, b.idx, da, db});
    return {v, static_cast<int>(nodes_.size() - 1), this};
}

Vector Tape::gradient(const Var& out, std::size_t n_inputs) const {
    Vector result(n_inputs, 0.0);
    std::vector<double> adjoint;
    gradient(out, result, adjoint);
    return result;
}

void Tape::gradient(const Var& out, std::span<double> result, std::vector<double>& adjoint) const {
    std::fill(result.begin(), result.end(), 0.0);
    if (out.is_constant()) return;
    adjoint.assign(nodes_.size(), 0.0);
    adjoint[static_cast<std::size_t>(out.idx)] = 1.0;
    for (std::size_t i = static_cast<std::size_t>(out.idx) + 1; i-- > 0;) {
        const double a = adjoint[i];
        if (a == 0.0) continue;
        const Node& n = nodes_[i];
        if (n.a >= 0) adjoint[static_cast<std::size_t>(n.a)] += a * n.da;
        if (n.b >= 0) adjoint[static_cast<std::size_t>(n.b)] += a * n.db;
    }
    const std::size_t n = std::min(result.size(), adjoint.size());
    std::copy_n(adjoint.begin(), n, result.begin());
}

void Tape::gradient(std::span<const Var> outputs, std::span<const double> weights, std::span<double> result,
                    std::vector<double>& adjoint) const {
    std::fill(result.begin(), result.end(), 0.0);
    adjoint.assign(nodes_.size(), 0.0);
    int top = -1;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
        if (outputs[k].is_constant() || weights[k] == 0.0) continue;
        adjoint[static_cast<std::size_t>(outputs[k].idx)] += weights[k];
        top = std::max(top, outputs[k].idx);
    }
    for (int i = top; i >= 0; --i) {
        const double a = adjoint[static_cast<std::size_t>(i)];
        if (a == 0.0) continue;
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.a >= 0) adjoint[static_cast<std::size_t>(n.a)] += a * n.da;
        if (n.b >= 0) adjoint[static_cast<std::size_t>(n.b)] += a * n.db;
    }
    const std::size_t n = std::min(result.size(), adjoint.size());
    std::copy_n(adjoint.begin(), n, result.begin());
}

namespace {

Tape* tape_of(const Var& a, const Var& b) { return a.tape ? a.tape : b.tape; }

}  // namespace

Var operator+(const Var& a, const Var& b) {
    Tape* t = tape_of(a, b);
    if (!t) return Var(a.val + b.val);
    return t->binary(a.val + b.val, a, 1.0, b, 1.0);
}

Var operator-(const Var& a, const Var& b) {
    Tape* t = tape_of(a, b);
    if (!t) return Var(a.val - b.val);
    return t->binary(a.val - b.val, a, 1.0, b, -1.0);
}

Var operator*(const Var& a, const Var& b) {
    Tape* t = tape_of(a, b);
    if (!t) return Var(a.val * b.val);
    return t->binary(a.val * b.val, a, b.val, b, a.val);
}

Var operator/(const Var& a, const Var& b) {
    Tape* t = tape_of(a, b);
    const double q = a.val / b.val;
    if (!t) return Var(q);
    return t->binary(q, a, 1.0 / b.val, b, -q / b.val);
}

Var operator-(const Var& a) {
    if (!a.tape) return Var(-a.val);
    return a.tape->unary(-a.val, a, -1.0);
}

Var& Var::operator+=(const Var& o) { return *this = *this + o; }
Var& Var::operator-=(const Var& o) { return *this = *this - o; }
Var& Var::operator*=(const Var& o) { return *this = *this * o; }
Var& Var::operator/=(const Var& o) { return *this = *this / o; }

Var exp(const Var& a) {
    const double e = std::exp(a.val);
    if (!a.tape) return Var(e);
    return a.tape->unary(e, a, e);
}

Var log(const Var& a) {
    if (!a.tape) return Var(std::log(a.val));
    return a.tape->unary(std::log(a.val), a, 1.0 / a.val);
}

Var sqrt(const Var& a) {
    const double r = std::sqrt(a.val);
    if (!a.tape) return Var(r);
    return a.tape->unary(r, a, 0.5 / r);
}

Var sin(const Var& a) {
    if (!a.tape) return Var(std::sin(a.val));
    return a.tape->unary(std::sin(a.val), a, std::cos(a.val));
}

Var cos(const Var& a) {
    if (!a.tape) return Var(std::cos(a.val));
    return a.tape->unary(std::cos(a.val), a, -std::sin(a.val));
}

Var tanh(const Var& a) {
    const double t = std::tanh(a.val);
    if (!a.tape) return Var(t);
    return a.tape->unary(t, a, 1.0 - t * t);
}

Var pow(const Var& a, double p) {
    const double v = std::pow(a.val, p);
    if (!a.tape) return Var(v);
    return a.tape->unary(v, a, p * std::pow(a.val, p - 1.0));
}

}  // namespace dgm::ad

namespace dgm {

using ad::Dual;
using ad::Tape;
using ad::Var;

DiffFunction DiffFunction::with_analytic(JacobianFn jacobian, ContractionFn contraction) const {
    DiffFunction fn = *this;
    fn.jacobian_ = std::move(jacobian);
    fn.contraction_ = std::move(contraction);
    fn.mode_ = DiffMode::analytic;
    return fn;
}

DiffFunction DiffFunction::with_mode(DiffMode mode) const {
    DiffFunction fn = *this;
    fn.mode_ = mode;
    return fn;
}

Vector DiffFunction::operator()(std::span<const double> u) const {
    if (u.size() != input_dim_) throw DimensionMismatch("DiffFunction: input length mismatch");
    return eval_double_(u);
}

namespace {

void check_input(const DiffFunction& f, std::span<const double> u) {
    if (u.size() != f.input_dim()) throw DimensionMismatch("autodiff: input length mismatch");
}

template <class Range>
void require_finite(const Range& values, const char* what) {
    for (double x : values)
        if (!std::isfinite(x)) throw NonFiniteDerivative(std::string(what) + ": non-finite derivative");
}

DenseMatrix jacobian_reverse(const DiffFunction& f, std::span<const double> u) {
    Tape tape;
    std::vector<Var> x;
    x.reserve(u.size());
    for (double ui : u) x.push_back(tape.variable(ui));
    const std::vector<Var> y = f.eval(std::span<const Var>(x));
    DenseMatrix jac(y.size(), u.size());
    std::vector<double> adjoint;
    for (std::size_t k = 0; k < y.size(); ++k) tape.gradient(y[k], jac.row(k), adjoint);
    return jac;
}

DenseMatrix jacobian_forward(const DiffFunction& f, std::span<const double> u) {
    const std::size_t m = u.size();
    DenseMatrix jac(f.output_dim(), m);
    std::vector<Dual<double>> x(m);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < m; ++i) x[i] = Dual<double>(u[i], i == j ? 1.0 : 0.0);
        const auto y = f.eval(std::span<const Dual<double>>(x));
        for (std::size_t k = 0; k < y.size(); ++k) jac(k, j) = y[k].d;
    }
    return jac;
}

}  // namespace

DenseMatrix jacobian(const DiffFunction& f, std::span<const double> u, DiffMode mode) {
    check_input(f, u);
    DenseMatrix jac;
    switch (mode) {
        case DiffMode::analytic:
            if (f.has_analytic_jacobian()) {
                jac = f.analytic_jacobian()(u);
                break;
            }
            [[fallthrough]];
        case DiffMode::taped_reverse:
            jac = jacobian_reverse(f, u);
            break;
        case DiffMode::forward_dual:
            jac = jacobian_forward(f, u);
            break;
    }
    if (jac.rows() != f.output_dim() || jac.cols() != f.input_dim())
        throw DimensionMismatch("jacobian: closure returned wrong shape");
    require_finite(jac.entries(), "jacobian");
    return jac;
}

DenseMatrix jacobian(const DiffFunction& f, std::span<const double> u) { return jacobian(f, u, f.mode()); }

Vector jvp(const DiffFunction& f, std::span<const double> u, std::span<const double> tangent) {
    check_input(f, u);
    if (tangent.size() != u.size()) throw DimensionMismatch("jvp: tangent length mismatch");
    Vector out;
    if (f.mode() == DiffMode::analytic && f.has_analytic_jacobian()) {
        out = matvec(f.analytic_jacobian()(u), tangent);
    } else {
        std::vector<Dual<double>> x(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) x[i] = Dual<double>(u[i], tangent[i]);
        const auto y = f.eval(std::span<const Dual<double>>(x));
        out.resize(y.size());
        for (std::size_t k = 0; k < y.size(); ++k) out[k] = y[k].d;
    }
    require_finite(out, "jvp");
    return out;
}

Vector vjp(const DiffFunction& f, std::span<const double> u, std::span<const double> weights) {
    check_input(f, u);
    if (weights.size() != f.output_dim()) throw DimensionMismatch("vjp: weight length mismatch");
    Vector out;
    if (f.mode() == DiffMode::analytic && f.has_analytic_jacobian()) {
        out = matvec_transposed(f.analytic_jacobian()(u), weights);
    } else {
        Tape tape;
        std::vector<Var> x;
        x.reserve(u.size());
        for (double ui : u) x.push_back(tape.variable(ui));
        const std::vector<Var> y = f.eval(std::span<const Var>(x));
        Var s(0.0);
        for (std::size_t k = 0; k < y.size(); ++k)
            if (weights[k] != 0.0) s += weights[k] * y[k];
        out = tape.gradient(s, u.size());
    }
    require_finite(out, "vjp");
    return out;
}

Vector second_contraction_taped(const DiffFunction& f, std::span<const double> u, const DenseMatrix& w) {
    check_input(f, u);
    const std::size_t m = u.size();
    if (w.rows() != f.output_dim() || w.cols() != m)
        throw DimensionMismatch("second_contraction: weight matrix shape mismatch");

    // One reverse sweep per input direction j: the tangent outputs carry
    // d f_k / d u_j as taped expressions, and the gradient of
    // sum_k W(k, j) * d f_k / d u_j accumulates column j's contribution.
    Vector r(m, 0.0);
    Vector g(m, 0.0);
    std::vector<double> adjoint;
    std::vector<Dual<Var>> x(m);
    for (std::size_t j = 0; j < m; ++j) {
        bool any = false;
        for (std::size_t k = 0; k < w.rows(); ++k) any = any || w(k, j) != 0.0;
        if (!any) continue;
        Tape tape;
        for (std::size_t i = 0; i < m; ++i) x[i] = Dual<Var>(tape.variable(u[i]), Var(i == j ? 1.0 : 0.0));
        const auto y = f.eval(std::span<const Dual<Var>>(x));
        Var s(0.0);
        for (std::size_t k = 0; k < y.size(); ++k)
            if (w(k, j) != 0.0) s += w(k, j) * y[k].d;
        tape.gradient(s, g, adjoint);
        for (std::size_t i = 0; i < m; ++i) r[i] += g[i];
    }
    require_finite(r, "second_contraction");
    return r;
}

Vector second_contraction(const DiffFunction& f, std::span<const double> u, const DenseMatrix& w) {
    if (f.mode() == DiffMode::analytic && f.has_analytic_contraction()) {
        check_input(f, u);
        if (w.rows() != f.output_dim() || w.cols() != u.size())
            throw DimensionMismatch("second_contraction: weight matrix shape mismatch");
        Vector r = f.analytic_contraction()(u, w);
        require_finite(r, "second_contraction");
        return r;
    }
    return second_contraction_taped(f, u, w);
}

}  // namespace dgm
