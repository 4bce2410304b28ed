#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

namespace poissonize::ode {

template <std::size_t N>
using State = std::array<double, N>;

template <std::size_t N>
State<N> axpy(const State<N>& y, double a, const State<N>& k) {
    State<N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + a * k[i];
    return out;
}

/// Classical fourth-order Runge-Kutta step of an autonomous system y' = f(y).
template <std::size_t N, class F>
State<N> rk4_step(F&& f, const State<N>& y, double h) {
    const State<N> k1 = f(y);
    const State<N> k2 = f(axpy(y, 0.5 * h, k1));
    const State<N> k3 = f(axpy(y, 0.5 * h, k2));
    const State<N> k4 = f(axpy(y, h, k3));
    State<N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// Integrates y' = f(y) from 0 to `span` with `steps` equal RK4 steps.
template <std::size_t N, class F>
State<N> rk4_integrate(F&& f, State<N> y, double span, std::size_t steps) {
    const double h = span / static_cast<double>(steps);
    for (std::size_t n = 0; n < steps; ++n) y = rk4_step(f, y, h);
    return y;
}

template <std::size_t N>
struct EmbeddedResult {
    State<N> y5;
    State<N> err;  // y5 - y4
};

/// Runge-Kutta-Fehlberg 4(5) step; advances with the fifth-order solution.
template <std::size_t N, class F>
EmbeddedResult<N> rkf45_step(F&& f, const State<N>& y, double h) {
    auto comb = [&](std::initializer_list<std::pair<double, const State<N>*>> terms) {
        State<N> out = y;
        for (const auto& [c, k] : terms)
            for (std::size_t i = 0; i < N; ++i) out[i] += h * c * (*k)[i];
        return out;
    };
    const State<N> k1 = f(y);
    const State<N> k2 = f(comb({{1.0 / 4.0, &k1}}));
    const State<N> k3 = f(comb({{3.0 / 32.0, &k1}, {9.0 / 32.0, &k2}}));
    const State<N> k4 = f(comb({{1932.0 / 2197.0, &k1}, {-7200.0 / 2197.0, &k2}, {7296.0 / 2197.0, &k3}}));
    const State<N> k5 =
        f(comb({{439.0 / 216.0, &k1}, {-8.0, &k2}, {3680.0 / 513.0, &k3}, {-845.0 / 4104.0, &k4}}));
    const State<N> k6 = f(comb({{-8.0 / 27.0, &k1},
                                {2.0, &k2},
                                {-3544.0 / 2565.0, &k3},
                                {1859.0 / 4104.0, &k4},
                                {-11.0 / 40.0, &k5}}));
    EmbeddedResult<N> res;
    for (std::size_t i = 0; i < N; ++i) {
        const double y4 = y[i] + h * (25.0 / 216.0 * k1[i] + 1408.0 / 2565.0 * k3[i] + 2197.0 / 4104.0 * k4[i] -
                                      1.0 / 5.0 * k5[i]);
        res.y5[i] = y[i] + h * (16.0 / 135.0 * k1[i] + 6656.0 / 12825.0 * k3[i] + 28561.0 / 56430.0 * k4[i] -
                                9.0 / 50.0 * k5[i] + 2.0 / 55.0 * k6[i]);
        res.err[i] = res.y5[i] - y4;
    }
    return res;
}

/// PI step-size controller for an embedded pair of order 4.
struct PiController {
    double safety = 0.9;
    double min_factor = 0.2;
    double max_factor = 5.0;
    double prev_error = 1.0;

    /// `error` is the scaled error norm (accept iff <= 1). Returns the step factor.
    double factor(double error, bool accepted) {
        constexpr double kAlpha = 0.7 / 5.0, kBeta = 0.4 / 5.0;
        const double e = std::max(error, 1e-10);
        double fac = accepted ? safety * std::pow(e, -kAlpha) * std::pow(prev_error, kBeta)
                              : safety * std::pow(e, -1.0 / 5.0);
        if (accepted) prev_error = e;
        fac = std::clamp(fac, min_factor, max_factor);
        if (!accepted) fac = std::min(fac, 1.0);
        return fac;
    }
};

}  // namespace poissonize::ode
