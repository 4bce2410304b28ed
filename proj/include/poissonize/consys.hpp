#pragma once

// Three-dimensional conservative systems v = w x grad H and their Jacobi
// diagnostics.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>

#include "field.hpp"
#include "sampling.hpp"
#include "state.hpp"

namespace poissonize {

struct ConservativeSystem {
    std::string name;
    VectorField3 w;
    ScalarField3 H;
    /// Magnetic field for E x B systems (w = B / B^2); the default D of the extension.
    std::optional<VectorField3> B;
};

inline Vec3 velocity(const ConservativeSystem& sys, const Point3& p) {
    const Vec3 w = require_finite(sys.w(p), "w");
    return require_finite(cross(w, grad(sys.H, p)), "velocity");
}

/// w . v, which vanishes identically because v is perpendicular to w.
inline double constraint_residual(const ConservativeSystem& sys, const Point3& p) {
    return dot(require_finite(sys.w(p), "w"), velocity(sys, p));
}

enum class JacobiClass { Hamiltonian, Nonholonomic };

inline const char* to_string(JacobiClass c) {
    return c == JacobiClass::Hamiltonian ? "hamiltonian" : "nonholonomic";
}

struct JacobiReport {
    JacobiClass kind = JacobiClass::Hamiltonian;
    double max_abs_h = 0.0;
    Point3 argmax;
    std::size_t samples = 0;
};

inline constexpr double kDefaultHelicityTol = 1e-9;

/// Samples |h| on a Halton point set in `region`; "hamiltonian" iff the
/// sampled maximum stays below `tol_h`.
inline JacobiReport classify_jacobi(const ConservativeSystem& sys, const Box3& region, std::size_t samples,
                                    double tol_h = kDefaultHelicityTol) {
    JacobiReport rep;
    rep.samples = samples;
    bool first = true;
    for (const Point3& p : halton_points(region, samples)) {
        const double h = std::abs(helicity_density(sys.w, p));
        if (first || h > rep.max_abs_h) {
            rep.max_abs_h = h;
            rep.argmax = p;
            first = false;
        }
    }
    rep.kind = rep.max_abs_h < tol_h ? JacobiClass::Hamiltonian : JacobiClass::Nonholonomic;
    return rep;
}

/// max |C(sample) - C(initial)| along a recorded trajectory.
inline double casimir_drift(const ScalarField3& C, const TrajectoryRecord& traj) {
    if (traj.samples.empty()) return 0.0;
    const double c0 = C(traj.samples.front().state.p);
    double drift = 0.0;
    for (const auto& smp : traj.samples) drift = std::max(drift, std::abs(C(smp.state.p) - c0));
    return drift;
}

/// Closest approach of the recorded spatial path to its starting point after
/// the path has first moved more than half its maximal excursion away.
/// Distance is measured to the polyline through the samples. Returns +inf if
/// the path never leaves.
inline double recurrence_distance(const TrajectoryRecord& traj) {
    const auto& s = traj.samples;
    if (s.size() < 2) return std::numeric_limits<double>::infinity();
    const Point3 start = s.front().state.p;
    double dmax = 0.0;
    for (const auto& smp : s) dmax = std::max(dmax, norm(smp.state.p - start));
    if (dmax == 0.0) return std::numeric_limits<double>::infinity();
    std::size_t k = 0;
    while (norm(s[k].state.p - start) <= 0.5 * dmax) ++k;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = k; i + 1 < s.size(); ++i) {
        const Vec3 a = s[i].state.p, seg = s[i + 1].state.p - a;
        const double len2 = dot(seg, seg);
        const double u = len2 > 0.0 ? std::clamp(dot(start - a, seg) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, norm(a + u * seg - start));
    }
    return best;
}

/// |v| at the last sample divided by |v| at the first.
inline double terminal_speed_ratio(const ConservativeSystem& sys, const TrajectoryRecord& traj) {
    if (traj.samples.empty()) throw ConfigError("empty trajectory");
    const double v0 = norm(velocity(sys, traj.samples.front().state.p));
    if (v0 == 0.0) throw DomainError("initial speed is zero");
    return norm(velocity(sys, traj.samples.back().state.p)) / v0;
}

/// w = B / |B|^2 with its exact Jacobian.
inline VectorField3 inverse_square(const VectorField3& B) {
    auto eval = [B](const Point3& p) {
        const Vec3 b = B(p);
        const double b2 = dot(b, b);
        if (b2 == 0.0) throw ZeroFieldError("B vanishes; w = B/B^2 is undefined");
        return b / b2;
    };
    auto jac = [B](const Point3& p) {
        const Vec3 b = B(p);
        const Mat3 jb = B.jacobian(p);
        const double b2 = dot(b, b);
        if (b2 == 0.0) throw ZeroFieldError("B vanishes; w = B/B^2 is undefined");
        Mat3 out{};
        for (int j = 0; j < 3; ++j) {
            // d|B|^2/dx_j = 2 sum_k B_k dB_k/dx_j
            double db2 = 0.0;
            for (int k = 0; k < 3; ++k) db2 += 2.0 * b[k] * jb[k][j];
            for (int i = 0; i < 3; ++i) out[i][j] = jb[i][j] / b2 - b[i] * db2 / (b2 * b2);
        }
        return out;
    };
    return {std::move(eval), std::move(jac), "B/B^2"};
}

namespace builtins {

/// E x B drift example with w = (cos z + sin z, cos z - sin z, 0), H = |x|^2 / 2.
/// B = w / 2 so that B^2 = 1/2 and w = B / B^2.
inline ConservativeSystem plasma_particle() {
    VectorField3 w(
        [](const Point3& p) {
            const double c = std::cos(p.z), s = std::sin(p.z);
            return Vec3{c + s, c - s, 0.0};
        },
        [](const Point3& p) {
            const double c = std::cos(p.z), s = std::sin(p.z);
            return Mat3{{{0.0, 0.0, c - s}, {0.0, 0.0, -s - c}, {0.0, 0.0, 0.0}}};
        },
        "(cos z + sin z, cos z - sin z, 0)");
    VectorField3 B(
        [w](const Point3& p) { return 0.5 * w(p); },
        [w](const Point3& p) {
            Mat3 j = w.jacobian(p);
            for (auto& row : j)
                for (double& v : row) v *= 0.5;
            return j;
        },
        "(cos z + sin z, cos z - sin z, 0)/2");
    ScalarField3 H([](const Point3& p) { return 0.5 * dot(p, p); }, [](const Point3& p) { return p; },
                   "(x^2 + y^2 + z^2)/2");
    return {"plasma_particle", std::move(w), std::move(H), std::move(B)};
}

/// Free rigid body: w = x (angular momentum), H = sum x_i^2 / (2 I_i).
inline ConservativeSystem rigid_body(const Vec3& inertia) {
    if (!(inertia.x > 0.0 && inertia.y > 0.0 && inertia.z > 0.0))
        throw ConfigError("moments of inertia must be positive");
    VectorField3 w(
        [](const Point3& p) { return p; },
        [](const Point3&) { return Mat3{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}}; }, "(x, y, z)");
    const Vec3 inv{1.0 / inertia.x, 1.0 / inertia.y, 1.0 / inertia.z};
    ScalarField3 H(
        [inv](const Point3& p) { return 0.5 * (inv.x * p.x * p.x + inv.y * p.y * p.y + inv.z * p.z * p.z); },
        [inv](const Point3& p) { return Vec3{inv.x * p.x, inv.y * p.y, inv.z * p.z}; },
        "(x^2/Ix + y^2/Iy + z^2/Iz)/2");
    return {"rigid_body", std::move(w), std::move(H), std::nullopt};
}

inline constexpr double kMinFieldStrength = 1e-12;

/// E x B drift in magnetic field B with potential phi: w = B/B^2, H = phi.
/// B is probed on `probe_count` Halton points of `probe_box`; |B| below
/// kMinFieldStrength raises ZeroFieldError.
inline ConservativeSystem exb(VectorField3 B, ScalarField3 phi, const Box3& probe_box = Box3::cube(1.0),
                              std::size_t probe_count = 200) {
    for (const Point3& p : halton_points(probe_box, probe_count)) {
        const double b = norm(require_finite(B(p), "B"));
        if (b < kMinFieldStrength)
            throw ZeroFieldError("|B| = " + std::to_string(b) + " below threshold at probe point");
    }
    VectorField3 w = inverse_square(B);
    return {"exb", std::move(w), std::move(phi), std::move(B)};
}

/// Sheared field B = d_x + g(x, y) d_z, g = (y - sin y cos y)/2 - sin x, whose
/// helicity h = sin^2 y / (1 + g^2)^2 does not vanish. Default potential is zero.
inline ConservativeSystem nonintegrable_exb(ScalarField3 phi = ScalarField3::constant(0.0)) {
    VectorField3 B(
        [](const Point3& p) {
            const double g = 0.5 * (p.y - std::sin(p.y) * std::cos(p.y)) - std::sin(p.x);
            return Vec3{1.0, 0.0, g};
        },
        [](const Point3& p) {
            const double sy = std::sin(p.y);
            // dg/dy = (1 - cos^2 y + sin^2 y)/2 = sin^2 y
            return Mat3{{{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {-std::cos(p.x), sy * sy, 0.0}}};
        },
        "(1, 0, (y - sin y cos y)/2 - sin x)");
    VectorField3 w = inverse_square(B);
    return {"nonintegrable_exb", std::move(w), std::move(phi), std::move(B)};
}

}  // namespace builtins

}  // namespace poissonize
