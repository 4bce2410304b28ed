#pragma once

#include <array>
#include <cmath>

#include "errors.hpp"
#include "vec3.hpp"

namespace poissonize {

/// Forward-mode dual number with a gradient slot for (x, y, z).
struct Dual {
    double value = 0.0;
    std::array<double, 3> deriv{};

    constexpr Dual() = default;
    constexpr Dual(double v) : value(v) {}  // NOLINT: constants promote implicitly
    constexpr Dual(double v, std::array<double, 3> d) : value(v), deriv(d) {}

    static constexpr Dual variable(double v, int slot) {
        Dual d(v);
        d.deriv[static_cast<std::size_t>(slot)] = 1.0;
        return d;
    }

    constexpr bool is_constant() const { return deriv[0] == 0.0 && deriv[1] == 0.0 && deriv[2] == 0.0; }
    Vec3 gradient() const { return {deriv[0], deriv[1], deriv[2]}; }
};

namespace detail {

/// Applies the chain rule: result = (f(a), f'(a) * a').
inline Dual chain(const Dual& a, double fa, double dfa) {
    Dual r(fa);
    for (std::size_t i = 0; i < 3; ++i) r.deriv[i] = dfa * a.deriv[i];
    return r;
}

}  // namespace detail

inline Dual operator+(const Dual& a, const Dual& b) {
    Dual r(a.value + b.value);
    for (std::size_t i = 0; i < 3; ++i) r.deriv[i] = a.deriv[i] + b.deriv[i];
    return r;
}

inline Dual operator-(const Dual& a, const Dual& b) {
    Dual r(a.value - b.value);
    for (std::size_t i = 0; i < 3; ++i) r.deriv[i] = a.deriv[i] - b.deriv[i];
    return r;
}

inline Dual operator-(const Dual& a) { return detail::chain(a, -a.value, -1.0); }

inline Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.value * b.value);
    for (std::size_t i = 0; i < 3; ++i) r.deriv[i] = a.deriv[i] * b.value + a.value * b.deriv[i];
    return r;
}

inline Dual operator/(const Dual& a, const Dual& b) {
    if (b.value == 0.0) throw DomainError("division by zero");
    const double inv = 1.0 / b.value;
    Dual r(a.value * inv);
    for (std::size_t i = 0; i < 3; ++i)
        r.deriv[i] = (a.deriv[i] - r.value * b.deriv[i]) * inv;
    return r;
}

// Scalar math shared by the double and Dual evaluators. Domain checks live
// here so both paths fail identically.

inline double checked_div(double a, double b) {
    if (b == 0.0) throw DomainError("division by zero");
    return a / b;
}

inline double checked_log(double a) {
    if (!(a > 0.0)) throw DomainError("log of non-positive value");
    return std::log(a);
}

inline double checked_sqrt(double a) {
    if (a < 0.0) throw DomainError("sqrt of negative value");
    return std::sqrt(a);
}

inline double checked_asin(double a) {
    if (a < -1.0 || a > 1.0) throw DomainError("arcsin argument outside [-1, 1]");
    return std::asin(a);
}

inline bool is_integer(double b) { return std::isfinite(b) && std::floor(b) == b; }

inline double checked_pow(double a, double b) {
    if (a < 0.0 && !is_integer(b)) throw DomainError("non-integer power of negative base");
    if (a == 0.0 && b < 0.0) throw DomainError("division by zero");
    return std::pow(a, b);
}

inline Dual sin(const Dual& a) { return detail::chain(a, std::sin(a.value), std::cos(a.value)); }
inline Dual cos(const Dual& a) { return detail::chain(a, std::cos(a.value), -std::sin(a.value)); }

inline Dual tan(const Dual& a) {
    const double t = std::tan(a.value);
    return detail::chain(a, t, 1.0 + t * t);
}

inline Dual exp(const Dual& a) {
    const double e = std::exp(a.value);
    return detail::chain(a, e, e);
}

inline Dual log(const Dual& a) { return detail::chain(a, checked_log(a.value), 1.0 / a.value); }

inline Dual sqrt(const Dual& a) {
    const double s = checked_sqrt(a.value);
    return a.is_constant() ? Dual(s) : detail::chain(a, s, 0.5 / s);
}

inline Dual abs(const Dual& a) {
    const double sgn = a.value > 0.0 ? 1.0 : (a.value < 0.0 ? -1.0 : 0.0);
    return detail::chain(a, std::abs(a.value), sgn);
}

inline Dual asin(const Dual& a) {
    const double v = checked_asin(a.value);
    return a.is_constant() ? Dual(v) : detail::chain(a, v, 1.0 / std::sqrt(1.0 - a.value * a.value));
}

inline Dual pow(const Dual& a, const Dual& b) {
    const double v = checked_pow(a.value, b.value);
    if (b.is_constant()) {
        if (a.is_constant()) return Dual(v);
        if (b.value == 0.0) return Dual(1.0);
        return detail::chain(a, v, b.value * checked_pow(a.value, b.value - 1.0));
    }
    // Variable exponent: a^b = exp(b log a) requires a > 0.
    if (!(a.value > 0.0)) throw DomainError("variable exponent of non-positive base");
    const double la = std::log(a.value);
    Dual r(v);
    for (std::size_t i = 0; i < 3; ++i)
        r.deriv[i] = v * (b.deriv[i] * la + b.value * a.deriv[i] / a.value);
    return r;
}

}  // namespace poissonize
