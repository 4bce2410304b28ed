#pragma once

// Four-dimensional extension of a 3D conservative system by one variable s.
//
// The extended operator adds a d_x^d_s + b d_y^d_s + c d_z^d_s to J with
// (a, b, c) = D + s curl w. Rescaled by r = w.D + s h it satisfies the Jacobi
// identity whenever div D = 0, and the extended flow X = J(dH) is
// divergence free for any D.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "consys.hpp"
#include "field.hpp"
#include "sampling.hpp"
#include "state.hpp"

namespace poissonize {

inline constexpr double kDefaultRFloor = 1e-10;
inline constexpr double kClosednessTol = 1e-8;
inline constexpr std::size_t kClosednessProbes = 200;

enum class Closedness { Require, Report };

struct ExtensionSpec {
    VectorField3 D;
    std::string d_name;
    double r_floor = kDefaultRFloor;
    /// max |div D| over the construction-time probe set.
    double closedness_residual = 0.0;

    bool closed() const { return closedness_residual <= kClosednessTol; }
};

/// Builds an extension around D and probes div D on a Halton set.
/// With Closedness::Require a residual above kClosednessTol throws NotClosedError.
inline ExtensionSpec make_extension(VectorField3 D, std::string d_name, Closedness mode = Closedness::Require,
                                    const Box3& probe_box = Box3::cube(1.0), double r_floor = kDefaultRFloor) {
    if (!(r_floor > 0.0)) throw ConfigError("r_floor must be positive");
    double residual = 0.0;
    for (const Point3& p : halton_points(probe_box, kClosednessProbes))
        residual = std::max(residual, std::abs(div(D, p)));
    if (mode == Closedness::Require && residual > kClosednessTol)
        throw NotClosedError("D is not divergence free: max |div D| = " + std::to_string(residual));
    return {std::move(D), std::move(d_name), r_floor, residual};
}

/// D = B for E x B systems, D = w otherwise. D = w is only reported, not
/// required, to be closed.
inline ExtensionSpec default_extension(const ConservativeSystem& sys, const Box3& probe_box = Box3::cube(1.0)) {
    if (sys.B) return make_extension(*sys.B, "B", Closedness::Require, probe_box);
    return make_extension(sys.w, "w", Closedness::Report, probe_box);
}

/// (a, b, c) = D + s curl w.
inline Vec3 abc_coefficients(const ConservativeSystem& sys, const ExtensionSpec& ext, const ExtendedState& st) {
    const Vec3 d = require_finite(ext.D(st.p), "D");
    return d + st.s * curl(sys.w, st.p);
}

/// Row-major 4x4 antisymmetric matrix over (x, y, z, s).
using Mat4 = std::array<std::array<double, 4>, 4>;

inline Mat4 extended_operator(const ConservativeSystem& sys, const ExtensionSpec& ext, const ExtendedState& st) {
    const Vec3 w = require_finite(sys.w(st.p), "w");
    const Vec3 abc = abc_coefficients(sys, ext, st);
    Mat4 m{};
    // w_x = J^32, w_y = J^13, w_z = J^21
    m[0][1] = -w.z;
    m[0][2] = w.y;
    m[1][2] = -w.x;
    m[0][3] = abc.x;
    m[1][3] = abc.y;
    m[2][3] = abc.z;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < i; ++j) m[i][j] = -m[j][i];
    return m;
}

struct ExtendedVelocity {
    Vec3 spatial;
    double ds_dt = 0.0;
};

/// X = w x grad H - (D + s curl w) . grad H d_s. The spatial part is the 3D
/// velocity unchanged.
inline ExtendedVelocity extended_velocity(const ConservativeSystem& sys, const ExtensionSpec& ext,
                                          const ExtendedState& st) {
    const Vec3 gh = grad(sys.H, st.p);
    const Vec3 w = require_finite(sys.w(st.p), "w");
    const Vec3 abc = abc_coefficients(sys, ext, st);
    return {require_finite(cross(w, gh), "velocity"), require_finite(-dot(abc, gh), "ds/dt")};
}

struct ConformalFactor {
    double signed_value = 0.0;  // w.D + s h
    double magnitude = 0.0;
};

inline ConformalFactor conformal_factor_unchecked(const ConservativeSystem& sys, const ExtensionSpec& ext,
                                                  const ExtendedState& st) {
    const Vec3 w = require_finite(sys.w(st.p), "w");
    const double v = require_finite(dot(w, require_finite(ext.D(st.p), "D")) + st.s * helicity_density(sys.w, st.p),
                                    "conformal factor");
    return {v, std::abs(v)};
}

/// r = |w.D + s h|; throws ConformalFactorVanished below ext.r_floor.
inline ConformalFactor conformal_factor(const ConservativeSystem& sys, const ExtensionSpec& ext,
                                        const ExtendedState& st) {
    const ConformalFactor r = conformal_factor_unchecked(sys, ext, st);
    if (r.magnitude < ext.r_floor)
        throw ConformalFactorVanished("|w.D + s h| = " + std::to_string(r.magnitude) + " below floor");
    return r;
}

namespace detail {

inline double fd_step(double coord) { return 1e-5 * std::max(1.0, std::abs(coord)); }

inline ExtendedState shifted(ExtendedState st, int axis, double delta) {
    if (axis == 3) st.s += delta;
    else st.p[axis] += delta;
    return st;
}

inline double coord(const ExtendedState& st, int axis) { return axis == 3 ? st.s : st.p[axis]; }

inline std::array<double, 4> as_array(const ExtendedVelocity& v) {
    return {v.spatial.x, v.spatial.y, v.spatial.z, v.ds_dt};
}

}  // namespace detail

/// Central-difference 4-divergence of the extended velocity. The exact
/// value is zero for every system and every D.
inline double extended_divergence(const ConservativeSystem& sys, const ExtensionSpec& ext,
                                  const ExtendedState& st) {
    double total = 0.0;
    for (int axis = 0; axis < 4; ++axis) {
        const double hs = detail::fd_step(detail::coord(st, axis));
        const auto plus = detail::as_array(extended_velocity(sys, ext, detail::shifted(st, axis, hs)));
        const auto minus = detail::as_array(extended_velocity(sys, ext, detail::shifted(st, axis, -hs)));
        total += (plus[axis] - minus[axis]) / (2.0 * hs);
    }
    return total;
}

enum class OperatorScaling { Conformal, Unscaled };

/// Largest cyclic Jacobi sum over index triples of r^-1 J (or J itself with
/// OperatorScaling::Unscaled). Entry derivatives use central differences.
inline double jacobi_defect_4d(const ConservativeSystem& sys, const ExtensionSpec& ext, const ExtendedState& st,
                               OperatorScaling scaling = OperatorScaling::Conformal) {
    auto op_at = [&](const ExtendedState& x) {
        Mat4 m = extended_operator(sys, ext, x);
        if (scaling == OperatorScaling::Conformal) {
            const double r = conformal_factor(sys, ext, x).signed_value;
            for (auto& row : m)
                for (double& v : row) v /= r;
        }
        return m;
    };

    const Mat4 k = op_at(st);
    std::array<Mat4, 4> dk{};
    for (int axis = 0; axis < 4; ++axis) {
        const double hs = detail::fd_step(detail::coord(st, axis));
        const Mat4 plus = op_at(detail::shifted(st, axis, hs));
        const Mat4 minus = op_at(detail::shifted(st, axis, -hs));
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) dk[axis][i][j] = (plus[i][j] - minus[i][j]) / (2.0 * hs);
    }

    auto term = [&](int i, int j, int l) {
        double acc = 0.0;
        for (int m = 0; m < 4; ++m) acc += k[i][m] * dk[m][j][l];
        return acc;
    };

    double defect = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            for (int l = j + 1; l < 4; ++l)
                defect = std::max(defect, std::abs(term(i, j, l) + term(j, l, i) + term(l, i, j)));
    return defect;
}

/// s = (exp(sqrt2 m v) - 1) / 2: the extension coordinate of the E x B
/// example as a function of parallel velocity, normalized so s(0) = 0.
inline double s_of_vparallel(double vpar, double mass) {
    if (!(mass > 0.0)) throw ConfigError("mass must be positive");
    return 0.5 * std::expm1(std::numbers::sqrt2 * mass * vpar);
}

inline double vparallel_of_s(double s, double mass) {
    if (!(mass > 0.0)) throw ConfigError("mass must be positive");
    if (!(s > -0.5)) throw DomainError("s must exceed -1/2");
    return std::log1p(2.0 * s) / (std::numbers::sqrt2 * mass);
}

}  // namespace poissonize
