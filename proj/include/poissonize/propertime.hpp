#pragma once

// Trajectories of the extended flow in physical time t (dx/dt = X) or proper
// time tau (dx/dtau = X / r), with both clocks recorded via dtau/dt = r.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "consys.hpp"
#include "extension.hpp"
#include "ode.hpp"
#include "state.hpp"

namespace poissonize {

enum class Method { Rk4, Rkf45 };
enum class Clock { Physical, Proper };

inline const char* to_string(Method m) { return m == Method::Rk4 ? "rk4" : "rkf45"; }
inline const char* to_string(Clock c) { return c == Clock::Physical ? "physical" : "proper"; }

struct IntegratorConfig {
    Method method = Method::Rk4;
    Clock clock = Clock::Proper;
    /// End of the integration in units of the driving clock.
    double end = 10.0;
    /// Fixed step for rk4; initial step for rkf45.
    double dt = 1e-3;
    /// Record every n-th fixed step (the final state is always recorded).
    std::size_t sample_every = 1;
    double tol_rel = 1e-10;
    double tol_abs = 1e-12;
    double dt_min = 1e-12;
    double dt_max = 0.1;

    void validate() const {
        if (!(end > 0.0)) throw ConfigError("integration end must be positive");
        if (!(dt > 0.0)) throw ConfigError("dt must be positive");
        if (sample_every == 0) throw ConfigError("sample_every must be positive");
        if (method == Method::Rkf45) {
            if (!(tol_rel > 0.0) || !(tol_abs > 0.0)) throw ConfigError("tolerances must be positive");
            if (!(dt_min > 0.0) || !(dt_max >= dt_min)) throw ConfigError("invalid step bounds");
        }
    }
};

inline TrajectorySample make_sample(const ConservativeSystem& sys, const ExtensionSpec& ext,
                                    const ExtendedState& st, double t, double tau) {
    TrajectorySample smp;
    smp.t = t;
    smp.tau = tau;
    smp.state = st;
    smp.H = sys.H(st.p);
    smp.h = helicity_density(sys.w, st.p);
    smp.r = conformal_factor_unchecked(sys, ext, st).signed_value;
    smp.constraint_residual = constraint_residual(sys, st.p);
    return smp;
}

/// dt/dtau = 1 / (w.D + s h), signed.
inline double jacobian_g(const ConservativeSystem& sys, const ExtensionSpec& ext, const ExtendedState& st) {
    return 1.0 / conformal_factor(sys, ext, st).signed_value;
}

namespace detail {

using Aug = ode::State<5>;  // x, y, z, s, other clock

inline ExtendedState unpack(const Aug& y) { return {{y[0], y[1], y[2]}, y[3]}; }

}  // namespace detail

/// Integrates the extended system from `init`. The driving clock is
/// cfg.clock; the other clock is carried as a fifth state component.
///
/// If w.D + s h drops below ext.r_floor (including a sign change) the
/// partial record is returned with status ConformalFactorVanished; the same
/// holds for StepFailure under rkf45.
inline TrajectoryRecord integrate(const ConservativeSystem& sys, const ExtensionSpec& ext,
                                  const ExtendedState& init, const IntegratorConfig& cfg) {
    cfg.validate();
    const double r0 = conformal_factor_unchecked(sys, ext, init).signed_value;
    if (!(r0 > ext.r_floor))
        throw ConformalFactorVanished("initial conformal factor " + std::to_string(r0) + " not above floor");

    TrajectoryRecord rec;
    rec.method = to_string(cfg.method);
    rec.step = cfg.dt;
    rec.clock = to_string(cfg.clock);
    rec.system_name = sys.name;
    rec.d_name = ext.d_name;

    auto rhs = [&](const detail::Aug& y) {
        const ExtendedState st = detail::unpack(y);
        const double r = conformal_factor_unchecked(sys, ext, st).signed_value;
        if (!(r > ext.r_floor))
            throw ConformalFactorVanished("conformal factor " + std::to_string(r) + " reached floor");
        const ExtendedVelocity v = extended_velocity(sys, ext, st);
        if (cfg.clock == Clock::Physical) return detail::Aug{v.spatial.x, v.spatial.y, v.spatial.z, v.ds_dt, r};
        const double g = 1.0 / r;
        return detail::Aug{g * v.spatial.x, g * v.spatial.y, g * v.spatial.z, g * v.ds_dt, g};
    };

    auto record = [&](double clock_value, const detail::Aug& y) {
        const double t = cfg.clock == Clock::Physical ? clock_value : y[4];
        const double tau = cfg.clock == Clock::Physical ? y[4] : clock_value;
        rec.samples.push_back(make_sample(sys, ext, detail::unpack(y), t, tau));
    };

    detail::Aug y{init.p.x, init.p.y, init.p.z, init.s, 0.0};
    record(0.0, y);

    try {
        if (cfg.method == Method::Rk4) {
            const auto full = static_cast<std::size_t>(std::floor(cfg.end / cfg.dt * (1.0 + 1e-12)));
            std::size_t n = 0;
            for (; n < full; ++n) {
                y = ode::rk4_step(rhs, y, cfg.dt);
                const bool last = (n + 1 == full) && cfg.end - static_cast<double>(full) * cfg.dt <= 1e-12 * cfg.end;
                if ((n + 1) % cfg.sample_every == 0 || last)
                    record(last ? cfg.end : static_cast<double>(n + 1) * cfg.dt, y);
            }
            const double rest = cfg.end - static_cast<double>(full) * cfg.dt;
            if (rest > 1e-12 * cfg.end) {
                y = ode::rk4_step(rhs, y, rest);
                record(cfg.end, y);
            }
        } else {
            double clock = 0.0, h = std::min(cfg.dt, cfg.dt_max);
            ode::PiController ctl;
            while (clock < cfg.end) {
                h = std::min(h, cfg.end - clock);
                const auto step = ode::rkf45_step(rhs, y, h);
                double err = 0.0;
                for (std::size_t i = 0; i < 5; ++i) {
                    const double scale = cfg.tol_abs + cfg.tol_rel * std::max(std::abs(y[i]), std::abs(step.y5[i]));
                    err = std::max(err, std::abs(step.err[i]) / scale);
                }
                const bool ok = err <= 1.0;
                if (ok) {
                    clock = (cfg.end - clock - h <= 1e-14 * cfg.end) ? cfg.end : clock + h;
                    y = step.y5;
                    record(clock, y);
                }
                h = std::min(cfg.dt_max, h * ctl.factor(err, ok));
                if (h < cfg.dt_min && clock < cfg.end)
                    throw StepFailure("step size fell below dt_min at clock " + std::to_string(clock));
            }
        }
    } catch (const ConformalFactorVanished& e) {
        rec.status = TerminalStatus::ConformalFactorVanished;
        rec.message = e.what();
    } catch (const StepFailure& e) {
        rec.status = TerminalStatus::StepFailure;
        rec.message = e.what();
    }
    return rec;
}

/// Volume of the N-simplex spanned by N+1 vertices: |det(v_i - v_0)| / N!.
template <std::size_t N>
double simplex_volume(std::span<const std::array<double, N>> vertices) {
    if (vertices.size() < N + 1) throw ConfigError("simplex needs N+1 vertices");
    std::array<std::array<double, N>, N> m{};
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) m[i][j] = vertices[i + 1][j] - vertices[0][j];
    double det = 1.0;
    for (std::size_t c = 0; c < N; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < N; ++r)
            if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
        if (m[piv][c] == 0.0) return 0.0;
        if (piv != c) {
            std::swap(m[piv], m[c]);
            det = -det;
        }
        det *= m[c][c];
        for (std::size_t r = c + 1; r < N; ++r) {
            const double f = m[r][c] / m[c][c];
            for (std::size_t k = c; k < N; ++k) m[r][k] -= f * m[c][k];
        }
    }
    double fact = 1.0;
    for (std::size_t k = 2; k <= N; ++k) fact *= static_cast<double>(k);
    return std::abs(det) / fact;
}

namespace detail {

/// Mean of V(t)/V(0) over the simplex and its point reflection through the
/// first vertex. The reflection cancels the term linear in the edge length
/// that a single curved image simplex picks up.
template <std::size_t N, class Rhs>
double reflected_volume_ratio(const std::array<std::array<double, N>, N + 1>& verts, Rhs rhs, double t_end,
                              double dt) {
    const double v0 = simplex_volume<N>(std::span<const std::array<double, N>>(verts));
    if (!(v0 > 0.0)) throw ConfigError("degenerate simplex");
    auto mirror = verts;
    for (std::size_t i = 1; i <= N; ++i)
        for (std::size_t j = 0; j < N; ++j) mirror[i][j] = 2.0 * verts[0][j] - verts[i][j];
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    auto evolved = [&](std::array<std::array<double, N>, N + 1> vs) {
        for (auto& v : vs) v = ode::rk4_integrate(rhs, ode::State<N>(v), t_end, steps);
        return simplex_volume<N>(std::span<const std::array<double, N>>(vs));
    };
    return 0.5 * (evolved(verts) + evolved(mirror)) / v0;
}

}  // namespace detail

/// Evolves the simplex of the first five states of `cloud` under the extended
/// flow in physical time and returns |V(t_end)/V(0) - 1|, averaged with the
/// reflected simplex.
inline double volume_preservation_check(const ConservativeSystem& sys, const ExtensionSpec& ext,
                                        std::span<const ExtendedState> cloud, double t_end, double dt) {
    if (cloud.size() < 5) throw ConfigError("volume check needs at least 5 states");
    std::array<std::array<double, 4>, 5> verts{};
    for (std::size_t i = 0; i < 5; ++i) verts[i] = {cloud[i].p.x, cloud[i].p.y, cloud[i].p.z, cloud[i].s};
    auto rhs = [&](const ode::State<4>& y) {
        const ExtendedVelocity v = extended_velocity(sys, ext, {{y[0], y[1], y[2]}, y[3]});
        return ode::State<4>{v.spatial.x, v.spatial.y, v.spatial.z, v.ds_dt};
    };
    return std::abs(detail::reflected_volume_ratio<4>(verts, rhs, t_end, dt) - 1.0);
}

/// Same check for the unextended 3D flow v = w x grad H (4 vertices).
inline double volume_preservation_check_3d(const ConservativeSystem& sys, std::span<const Point3> cloud,
                                           double t_end, double dt) {
    if (cloud.size() < 4) throw ConfigError("volume check needs at least 4 points");
    std::array<std::array<double, 3>, 4> verts{};
    for (std::size_t i = 0; i < 4; ++i) verts[i] = {cloud[i].x, cloud[i].y, cloud[i].z};
    auto rhs = [&](const ode::State<3>& y) {
        const Vec3 v = velocity(sys, {y[0], y[1], y[2]});
        return ode::State<3>{v.x, v.y, v.z};
    };
    return std::abs(detail::reflected_volume_ratio<3>(verts, rhs, t_end, dt) - 1.0);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& rec) {
    out << "tau,t,x,y,z,s,H,r,h,constraint_residual\n";
    for (const auto& s : rec.samples) {
        const double cols[] = {s.tau, s.t, s.state.p.x, s.state.p.y, s.state.p.z, s.state.s,
                               s.H,   s.r, s.h,         s.constraint_residual};
        for (std::size_t i = 0; i < std::size(cols); ++i) {
            if (i) out << ',';
            out << format_double(cols[i]);
        }
        out << '\n';
    }
}

}  // namespace poissonize
