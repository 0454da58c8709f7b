#include "dgm/models.hpp"

#include <cmath>
#include <stdexcept>

#include "dgm/errors.hpp"

namespace dgm {

void LotkaVolterraSpec::validate() const {
    if (n_steps < 1) throw std::invalid_argument("lotka_volterra: n_steps must be >= 1");
    if (!(dt_sim > 0.0) || !std::isfinite(dt_sim)) throw std::invalid_argument("lotka_volterra: dt_sim must be > 0");
    if (!(y0[0] > 0.0) || !(y0[1] > 0.0)) throw std::invalid_argument("lotka_volterra: y0 must be positive");
    if (!(prior_sigma > 0.0)) throw std::invalid_argument("lotka_volterra: prior_sigma must be > 0");
}

namespace {


template <class T>
std::array<T, 4> lv_rates(const LotkaVolterraSpec& s, std::span<const T> u) {
    using std::exp;
    std::array<T, 4> th;
    for (std::size_t i = 0; i < 4; ++i) th[i] = exp(s.prior_mu + s.prior_sigma * u[i]);
    return th;
}

template <class T>
std::vector<T> lv_simulate(const LotkaVolterraSpec& s, std::span<const T> u) {
    const double dt = s.dt_sim;
    const double sq = std::sqrt(dt);
    const auto th = lv_rates(s, u);
    T y1 = s.y0[0];
    T y2 = s.y0[1];
    std::vector<T> out;
    out.reserve(2 * s.n_steps);
    for (std::size_t t = 0; t < s.n_steps; ++t) {
        const T f1 = th[0] * y1 - th[1] * y1 * y2;
        const T f2 = -(th[2] * y2) + th[3] * y1 * y2;
        T y1n = y1 + dt * f1 + sq * u[4 + 2 * t];
        T y2n = y2 + dt * f2 + sq * u[5 + 2 * t];
        y1 = std::move(y1n);
        y2 = std::move(y2n);
        out.push_back(y1);
        out.push_back(y2);
    }
    return out;
}

// Row-major dy/du by forward sensitivity recursion. Row t of each species only
// touches the parameter columns and the noise columns of steps <= t.
template <class T>
std::vector<T> lv_jacobian(const LotkaVolterraSpec& s, std::span<const T> u) {
    const double dt = s.dt_sim;
    const double sq = std::sqrt(dt);
    const double sig = s.prior_sigma;
    const std::size_t m = s.input_dim();
    const auto th = lv_rates(s, u);
    std::vector<T> jac(2 * s.n_steps * m, T(0.0));
    std::vector<T> d1(m, T(0.0)), d2(m, T(0.0)), n1(m, T(0.0)), n2(m, T(0.0));
    T y1 = s.y0[0];
    T y2 = s.y0[1];
    for (std::size_t t = 0; t < s.n_steps; ++t) {
        const T a11 = 1.0 + dt * (th[0] - th[1] * y2);
        const T a12 = -(dt * th[1] * y1);
        const T a21 = dt * th[3] * y2;
        const T a22 = 1.0 + dt * (th[3] * y1 - th[2]);
        const std::size_t active = 4 + 2 * t;
        if (t > 0) {
            for (std::size_t j = 0; j < active; ++j) {
                n1[j] = a11 * d1[j] + a12 * d2[j];
                n2[j] = a21 * d1[j] + a22 * d2[j];
            }
        }
        const T y12 = y1 * y2;
        n1[0] = n1[0] + dt * sig * th[0] * y1;
        n1[1] = n1[1] - dt * sig * th[1] * y12;
        n2[2] = n2[2] - dt * sig * th[2] * y2;
        n2[3] = n2[3] + dt * sig * th[3] * y12;
        n1[active] = sq;
        n2[active + 1] = sq;

        const T f1 = th[0] * y1 - th[1] * y12;
        const T f2 = th[3] * y12 - th[2] * y2;
        T y1n = y1 + dt * f1 + sq * u[active];
        T y2n = y2 + dt * f2 + sq * u[active + 1];
        y1 = std::move(y1n);
        y2 = std::move(y2n);

        T* row1 = jac.data() + (2 * t) * m;
        T* row2 = row1 + m;
        for (std::size_t j = 0; j < active + 2; ++j) {
            row1[j] = n1[j];
            row2[j] = n2[j];
        }
        std::swap(d1, n1);
        std::swap(d2, n2);
    }
    return jac;
}

DenseMatrix lv_jacobian_double(const LotkaVolterraSpec& s, std::span<const double> u) {
    return DenseMatrix(2 * s.n_steps, s.input_dim(), lv_jacobian<double>(s, u));
}

// r = grad_u sum_{k,j} W_kj J_kj(u): one reverse sweep through the sensitivity
// recursion of lv_jacobian. N1/N2 are adjoints of the sensitivity rows of the
// current step, y1b/y2b adjoints of the state after it.
Vector lv_contraction(const LotkaVolterraSpec& s, std::span<const double> u, const DenseMatrix& w) {
    const double dt = s.dt_sim;
    const double sq = std::sqrt(dt);
    const double sig = s.prior_sigma;
    const std::size_t m = s.input_dim();
    const std::size_t steps = s.n_steps;
    const auto th = lv_rates<double>(s, u);
    const std::vector<double> jac = lv_jacobian<double>(s, u);

    std::vector<double> y1(steps), y2(steps);
    y1[0] = s.y0[0];
    y2[0] = s.y0[1];
    for (std::size_t t = 0; t + 1 < steps; ++t) {
        y1[t + 1] = y1[t] + dt * (th[0] * y1[t] - th[1] * y1[t] * y2[t]) + sq * u[4 + 2 * t];
        y2[t + 1] = y2[t] + dt * (th[3] * y1[t] * y2[t] - th[2] * y2[t]) + sq * u[5 + 2 * t];
    }

    Vector r(m, 0.0);
    std::array<double, 4> thb{};
    std::vector<double> n1(m), n2(m), c1(m, 0.0), c2(m, 0.0);
    double y1b = 0.0;
    double y2b = 0.0;
    const double* wd = w.entries().data();
    for (std::size_t t = steps; t-- > 0;) {
        const std::size_t active = 4 + 2 * t;
        const double p1 = y1[t];
        const double p2 = y2[t];
        const double a11 = 1.0 + dt * (th[0] - th[1] * p2);
        const double a12 = -dt * th[1] * p1;
        const double a21 = dt * th[3] * p2;
        const double a22 = 1.0 + dt * (th[3] * p1 - th[2]);
        const double* w1 = wd + 2 * t * m;
        const double* w2 = w1 + m;
        for (std::size_t j = 0; j < active; ++j) {
            n1[j] = w1[j] + c1[j];
            n2[j] = w2[j] + c2[j];
        }

        double a11b = 0.0, a12b = 0.0, a21b = 0.0, a22b = 0.0;
        if (t > 0) {
            const double* d1 = jac.data() + 2 * (t - 1) * m;
            const double* d2 = d1 + m;
            for (std::size_t j = 0; j < active; ++j) {
                a11b += n1[j] * d1[j];
                a12b += n1[j] * d2[j];
                a21b += n2[j] * d1[j];
                a22b += n2[j] * d2[j];
            }
        }
        for (std::size_t j = 0; j < active; ++j) {
            c1[j] = a11 * n1[j] + a21 * n2[j];
            c2[j] = a12 * n1[j] + a22 * n2[j];
        }
        const double e0 = n1[0];
        const double e1 = n1[1];
        const double e2 = n2[2];
        const double e3 = n2[3];
        const double ds = dt * sig;
        const double p12 = p1 * p2;

        r[active] += sq * y1b;
        r[active + 1] += sq * y2b;
        thb[0] += dt * p1 * y1b + dt * a11b + ds * p1 * e0;
        thb[1] += -dt * p12 * y1b - dt * p2 * a11b - dt * p1 * a12b - ds * p12 * e1;
        thb[2] += -dt * p2 * y2b - dt * a22b - ds * p2 * e2;
        thb[3] += dt * p12 * y2b + dt * p2 * a21b + dt * p1 * a22b + ds * p12 * e3;
        const double nb1 = a11 * y1b + a21 * y2b - dt * th[1] * a12b + dt * th[3] * a22b + ds * th[0] * e0 -
                           ds * th[1] * p2 * e1 + ds * th[3] * p2 * e3;
        const double nb2 = a12 * y1b + a22 * y2b - dt * th[1] * a11b + dt * th[3] * a21b - ds * th[1] * p1 * e1 -
                           ds * th[2] * e2 + ds * th[3] * p1 * e3;
        y1b = nb1;
        y2b = nb2;
    }
    for (std::size_t i = 0; i < 4; ++i) r[i] += sig * th[i] * thb[i];
    return r;
}

std::vector<std::size_t> iota(std::size_t begin, std::size_t end) {
    std::vector<std::size_t> v;
    for (std::size_t i = begin; i < end; ++i) v.push_back(i);
    return v;
}

}  // namespace

Vector lotka_volterra_inputs(const LotkaVolterraSpec& spec, std::span<const double> rates,
                             std::span<const double> noise) {
    if (rates.size() != 4 || noise.size() != 2 * spec.n_steps)
        throw DimensionMismatch("lotka_volterra_inputs: expected 4 rates and 2T noise values");
    Vector u(spec.input_dim());
    for (std::size_t i = 0; i < 4; ++i) {
        if (!(rates[i] > 0.0)) throw std::invalid_argument("lotka_volterra_inputs: rates must be positive");
        u[i] = (std::log(rates[i]) - spec.prior_mu) / spec.prior_sigma;
    }
    std::copy(noise.begin(), noise.end(), u.begin() + 4);
    return u;
}

Vector lotka_volterra_back_solve(const LotkaVolterraSpec& spec, std::span<const double> param_inputs,
                                 std::span<const double> trajectory) {
    if (param_inputs.size() < 4 || trajectory.size() != 2 * spec.n_steps)
        throw DimensionMismatch("lotka_volterra_back_solve: bad input lengths");
    const double dt = spec.dt_sim;
    const double sq = std::sqrt(dt);
    const auto th = lv_rates<double>(spec, param_inputs.first(4));
    Vector u(spec.input_dim());
    std::copy(param_inputs.begin(), param_inputs.begin() + 4, u.begin());
    double y1 = spec.y0[0];
    double y2 = spec.y0[1];
    for (std::size_t t = 0; t < spec.n_steps; ++t) {
        const double f1 = th[0] * y1 - th[1] * y1 * y2;
        const double f2 = -th[2] * y2 + th[3] * y1 * y2;
        const double o1 = trajectory[2 * t];
        const double o2 = trajectory[2 * t + 1];
        u[4 + 2 * t] = (o1 - y1 - dt * f1) / sq;
        u[5 + 2 * t] = (o2 - y2 - dt * f2) / sq;
        y1 = o1;
        y2 = o2;
    }
    return u;
}

GeneratorModel lotka_volterra_model(const LotkaVolterraSpec& spec) {
    spec.validate();
    const std::size_t m = spec.input_dim();
    const std::size_t n = 2 * spec.n_steps;

    GeneratorModel model;
    model.name = "lotka_volterra";
    model.input_dim = m;
    model.observed_dim = n;
    model.latent_dim = 4;
    model.g_y = DiffFunction::from_generic(
                    m, n, [spec](auto u) { return lv_simulate(spec, u); }, DiffMode::analytic)
                    .with_analytic([spec](std::span<const double> u) { return lv_jacobian_double(spec, u); },
                                   [spec](std::span<const double> u, const DenseMatrix& w) {
                                       return lv_contraction(spec, u, w);
                                   });
    model.g_z = DiffFunction::from_generic(m, 4, [spec](auto u) {
        using T = ad::scalar_of<decltype(u)>;
        std::vector<T> z;
        for (std::size_t i = 0; i < 4; ++i) z.push_back(spec.prior_mu + spec.prior_sigma * u[i]);
        return z;
    });
    model.base = BaseDensity::standard_normal_of(m);
    model.structure.kind = NoiseStructure::Kind::autoregressive;
    model.structure.global_indices = iota(0, 4);
    model.structure.noise_indices = iota(4, m);
    model.directed = DirectedSplit{iota(0, 4), iota(4, m)};
    model.latent_names = {"log_z1", "log_z2", "log_z3", "log_z4"};

    // Rates from a least-squares fit of the drift to the observed increments
    // (the drift is linear in the rates), jittered per seed, then the noise
    // increments that reproduce the observation exactly.
    model.init_solver = [spec](const Observation& obs, std::uint64_t seed) {
        const std::size_t steps = spec.n_steps;
        const auto& y = obs.values;
        if (y.size() != 2 * steps) throw DimensionMismatch("lotka_volterra: observation length mismatch");
        double a[2][2][2] = {};
        double b[2][2] = {};
        double p1 = spec.y0[0];
        double p2 = spec.y0[1];
        for (std::size_t t = 0; t < steps; ++t) {
            const double r1 = (y[2 * t] - p1) / spec.dt_sim;
            const double r2 = (y[2 * t + 1] - p2) / spec.dt_sim;
            const double x[2][2] = {{p1, -p1 * p2}, {-p2, p1 * p2}};
            const double r[2] = {r1, r2};
            for (int s = 0; s < 2; ++s)
                for (int i = 0; i < 2; ++i) {
                    b[s][i] += x[s][i] * r[s];
                    for (int j = 0; j < 2; ++j) a[s][i][j] += x[s][i] * x[s][j];
                }
            p1 = y[2 * t];
            p2 = y[2 * t + 1];
        }
        const double fallback = std::exp(spec.prior_mu);
        double rates[4] = {fallback, fallback, fallback, fallback};
        for (int s = 0; s < 2; ++s) {
            const double det = a[s][0][0] * a[s][1][1] - a[s][0][1] * a[s][1][0];
            const double scale = a[s][0][0] * a[s][1][1];
            if (!(std::abs(det) > 1e-12 * scale)) continue;
            const double t0 = (a[s][1][1] * b[s][0] - a[s][0][1] * b[s][1]) / det;
            const double t1 = (a[s][0][0] * b[s][1] - a[s][1][0] * b[s][0]) / det;
            if (std::isfinite(t0) && t0 > 0.0) rates[2 * s] = t0;
            if (std::isfinite(t1) && t1 > 0.0) rates[2 * s + 1] = t1;
        }
        Rng rng(seed);
        Vector params(4);
        for (std::size_t i = 0; i < 4; ++i)
            params[i] = (std::log(rates[i]) - spec.prior_mu) / spec.prior_sigma + 0.1 * rng.normal();
        return lotka_volterra_back_solve(spec, params, y);
    };
    model.validate();
    return model;
}

GeneratorModel linear_gaussian_model(const Vector& weights) {
    const std::size_t m = weights.size();
    if (m < 1) throw std::invalid_argument("linear_gaussian: need at least one weight");
    bool any = false;
    for (double w : weights) {
        if (!std::isfinite(w)) throw std::invalid_argument("linear_gaussian: weights must be finite");
        any = any || w != 0.0;
    }
    if (!any) throw std::invalid_argument("linear_gaussian: weights must not all be zero");

    GeneratorModel model;
    model.name = "linear_gaussian";
    model.input_dim = m;
    model.observed_dim = 1;
    model.latent_dim = 1;
    model.g_y = DiffFunction::from_generic(m, 1, [weights](auto u) {
                    using T = ad::scalar_of<decltype(u)>;
                    T acc = 0.0;
                    for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * u[i];
                    return std::vector<T>{acc};
                }).with_analytic([weights](std::span<const double>) { return DenseMatrix(1, weights.size(), weights); },
                                 [m](std::span<const double>, const DenseMatrix&) { return Vector(m, 0.0); });
    model.g_z = DiffFunction::from_generic(m, 1, [](auto u) {
        using T = ad::scalar_of<decltype(u)>;
        return std::vector<T>{u[0]};
    });
    model.base = BaseDensity::standard_normal_of(m);
    if (m > 1 && weights[0] != 0.0) model.directed = DirectedSplit{{0}, iota(1, m)};
    model.latent_names = {"u1"};
    model.validate();
    return model;
}

GeneratorModel circle_model(double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("circle: radius must be > 0");
    GeneratorModel model;
    model.name = "circle";
    model.input_dim = 2;
    model.observed_dim = 1;
    model.latent_dim = 2;
    model.g_y = DiffFunction::from_generic(2, 1, [](auto u) {
        using T = ad::scalar_of<decltype(u)>;
        return std::vector<T>{u[0] * u[0] + u[1] * u[1]};
    });
    model.g_z = DiffFunction::from_generic(2, 2, [](auto u) {
        using T = ad::scalar_of<decltype(u)>;
        return std::vector<T>{u[0], u[1]};
    });
    model.base = BaseDensity::standard_normal_of(2);
    model.latent_names = {"u1", "u2"};
    model.init_solver = [](const Observation& obs, std::uint64_t seed) {
        if (obs.values.size() != 1 || !(obs.values[0] > 0.0))
            throw InitializationFailed("circle: observation must be a positive squared radius");
        Rng rng(seed);
        Vector u = rng.normal_vector(2);
        const double scale = std::sqrt(obs.values[0]) / norm2(u);
        for (double& v : u) v *= scale;
        return u;
    };
    model.validate();
    return model;
}

GeneratorModel toy1d_model() {
    GeneratorModel model;
    model.name = "toy1d";
    model.input_dim = 2;
    model.observed_dim = 1;
    model.latent_dim = 1;
    model.g_y = DiffFunction::from_generic(2, 1, [](auto u) {
        using T = ad::scalar_of<decltype(u)>;
        return std::vector<T>{u[0] * u[0] * u[0] + 0.5 * u[1]};
    });
    model.g_z = DiffFunction::from_generic(2, 1, [](auto u) {
        using T = ad::scalar_of<decltype(u)>;
        return std::vector<T>{u[0]};
    });
    model.base = BaseDensity::standard_normal_of(2);
    model.structure.kind = NoiseStructure::Kind::elementwise;
    model.structure.global_indices = {0};
    model.structure.noise_indices = {1};
    model.directed = DirectedSplit{{0}, {1}};
    model.latent_names = {"z"};
    model.validate();
    return model;
}

double toy1d_grid_posterior_mean(double y_obs, double kernel_sd, std::size_t points) {
    if (points < 2) throw std::invalid_argument("toy1d_grid_posterior_mean: need at least 2 points");
    const double lo = -6.0;
    const double hi = 6.0;
    const double h = (hi - lo) / static_cast<double>(points - 1);
    const double var = 0.25 + kernel_sd * kernel_sd;
    double mass = 0.0;
    double first = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        const double z = lo + h * static_cast<double>(i);
        const double r = y_obs - z * z * z;
        const double w = (i == 0 || i + 1 == points ? 0.5 : 1.0) * std::exp(-0.5 * z * z - 0.5 * r * r / var);
        mass += w;
        first += w * z;
    }
    return first / mass;
}

}  // namespace dgm
