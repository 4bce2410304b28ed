#pragma once

// E x B drift operator in magnetic coordinates (ell, psi, zeta) for a field
//   B = alpha grad psi x grad zeta + i grad psi x grad ell + beta grad zeta x grad ell.
// All geometry enters through user-supplied scalar functions of (ell, psi, zeta).
// Points are stored in Point3 with x = ell, y = psi, z = zeta.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "extension.hpp"
#include "field.hpp"
#include "sampling.hpp"

namespace poissonize::magcoords {

struct MagGeometry {
    ScalarField3 alpha;
    ScalarField3 beta;
    ScalarField3 i;
    ScalarField3 rho;  // B_p^2 / B^2
    ScalarField3 q;    // -d_ell . d_psi
    ScalarField3 R;    // cylindrical radius
    ScalarField3 gpp;  // |d_psi|^2
};

struct MagPoint {
    double ell = 0.0;
    double psi = 0.0;
    double zeta = 0.0;
    double s = 0.0;

    Point3 coords() const { return {ell, psi, zeta}; }
};

inline constexpr double kMagClosednessTol = 1e-8;

/// alpha_ell - i_zeta + beta_psi; zero when the field 2-form is closed.
inline double closedness_residual(const MagGeometry& geo, const Point3& c) {
    return geo.alpha.gradient(c).x - geo.i.gradient(c).z + geo.beta.gradient(c).y;
}

/// Checks rho > 0, R > 0 and closedness on a Halton probe set; throws ConfigError.
inline MagGeometry validated(MagGeometry geo, const Box3& probe_box, std::size_t probes = 200) {
    for (const Point3& c : halton_points(probe_box, probes)) {
        if (!(geo.rho(c) > 0.0)) throw ConfigError("rho must be positive on the probe domain");
        if (!(geo.R(c) > 0.0)) throw ConfigError("R must be positive on the probe domain");
        const double res = closedness_residual(geo, c);
        if (!(std::abs(res) <= kMagClosednessTol))
            throw ConfigError("alpha_ell - i_zeta + beta_psi = " + std::to_string(res) + " (field 2-form not closed)");
    }
    return geo;
}

/// Coefficients of J = c_zp d_zeta^d_psi + c_lz d_ell^d_zeta + c_lp d_ell^d_psi.
struct MagOperator {
    double zeta_psi = 0.0;
    double ell_zeta = 0.0;
    double ell_psi = 0.0;

    /// Antisymmetric matrix in (ell, psi, zeta) ordering.
    Mat3 matrix() const {
        Mat3 m{};
        m[2][1] = zeta_psi;
        m[1][2] = -zeta_psi;
        m[0][2] = ell_zeta;
        m[2][0] = -ell_zeta;
        m[0][1] = ell_psi;
        m[1][0] = -ell_psi;
        return m;
    }
};

namespace detail {

/// a1 = alpha - beta q, a2 = beta |d_psi|^2 - alpha q, a3 = i R^2 with gradients.
struct Coefficients {
    double rho, alpha, beta, i;
    double a1, a2, a3;
    Vec3 grad_rho, grad_a1, grad_a2, grad_a3;
};

inline Coefficients coefficients(const MagGeometry& geo, const Point3& c) {
    Coefficients k{};
    k.rho = geo.rho(c);
    k.alpha = geo.alpha(c);
    k.beta = geo.beta(c);
    k.i = geo.i(c);
    const double q = geo.q(c), R = geo.R(c), gpp = geo.gpp(c);
    const Vec3 ga = geo.alpha.gradient(c), gb = geo.beta.gradient(c), gi = geo.i.gradient(c);
    const Vec3 gq = geo.q.gradient(c), gR = geo.R.gradient(c), gg = geo.gpp.gradient(c);
    k.grad_rho = geo.rho.gradient(c);
    k.a1 = k.alpha - k.beta * q;
    k.a2 = k.beta * gpp - k.alpha * q;
    k.a3 = k.i * R * R;
    k.grad_a1 = ga - q * gb - k.beta * gq;
    k.grad_a2 = gpp * gb + k.beta * gg - q * ga - k.alpha * gq;
    k.grad_a3 = (R * R) * gi + (2.0 * k.i * R) * gR;
    return k;
}

}  // namespace detail

inline MagOperator mag_operator(const MagGeometry& geo, const MagPoint& p) {
    const auto k = detail::coefficients(geo, p.coords());
    return {k.rho * k.a1, k.rho * k.a2, k.rho * k.a3};
}

/// theta = rho [a1 d_ell + a2 d_psi - a3 d_zeta], spanning the kernel of J.
inline Vec3 mag_kernel_covector(const MagGeometry& geo, const MagPoint& p) {
    const auto k = detail::coefficients(geo, p.coords());
    return {k.rho * k.a1, k.rho * k.a2, -k.rho * k.a3};
}

/// Signed r = *[theta ^ (B + s d theta)] with exact derivatives of the
/// geometry functions; throws ConformalFactorVanished when |r| < r_floor.
inline double mag_conformal_factor(const MagGeometry& geo, const MagPoint& p, double r_floor = kDefaultRFloor) {
    const auto k = detail::coefficients(geo, p.coords());
    // theta = P1 d_ell + P2 d_psi - P3 d_zeta with P_n = rho a_n.
    const Vec3 dP1 = k.a1 * k.grad_rho + k.rho * k.grad_a1;
    const Vec3 dP2 = k.a2 * k.grad_rho + k.rho * k.grad_a2;
    const Vec3 dP3 = k.a3 * k.grad_rho + k.rho * k.grad_a3;
    // gradient components: x = d/d_ell, y = d/d_psi, z = d/d_zeta
    const double twist = k.a1 * (-dP3.y - dP2.z) + k.a2 * (dP1.z + dP3.x) - k.a3 * (dP2.x - dP1.y);
    const double r = require_finite(
        k.rho * (k.alpha * k.a1 + k.beta * k.a2 + k.i * k.a3 + p.s * twist), "magnetic conformal factor");
    if (std::abs(r) < r_floor) throw ConformalFactorVanished("magnetic-coordinate conformal factor below floor");
    return r;
}

}  // namespace poissonize::magcoords
