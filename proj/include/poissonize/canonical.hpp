#pragma once

// Canonical chart of the E x B plasma example (D = B):
//   q_x = (s + 1/2)(cos z + sin z),  p_x = -x,
//   q_y = (s + 1/2)(cos z - sin z),  p_y = -y,
// in which the proper-time flow obeys Hamilton's equations.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "consys.hpp"
#include "extension.hpp"
#include "ode.hpp"
#include "propertime.hpp"
#include "state.hpp"

namespace poissonize::canonical {

struct CanonicalState {
    double qx = 0.0;
    double px = 0.0;
    double qy = 0.0;
    double py = 0.0;

    std::array<double, 4> as_array() const { return {qx, px, qy, py}; }
    static CanonicalState from_array(const std::array<double, 4>& a) { return {a[0], a[1], a[2], a[3]}; }
};

/// Throws BranchViolation unless z is in (-pi/2, pi/2) and s > -1/2, the
/// region where the chart inverts.
inline void check_branch(const ExtendedState& st) {
    if (!(std::abs(st.p.z) < std::numbers::pi / 2))
        throw BranchViolation("z = " + std::to_string(st.p.z) + " outside the principal arcsin branch");
    if (!(st.s > -0.5)) throw BranchViolation("s + 1/2 must be positive");
}

inline CanonicalState to_canonical(const ExtendedState& st) {
    const double c = std::cos(st.p.z), sn = std::sin(st.p.z), k = st.s + 0.5;
    return {k * (c + sn), -st.p.x, k * (c - sn), -st.p.y};
}

namespace detail {

inline double radius_sq(const CanonicalState& cs) {
    const double q2 = cs.qx * cs.qx + cs.qy * cs.qy;
    if (!(q2 > 0.0)) throw ChartSingularity("q_x = q_y = 0");
    return q2;
}

/// arcsin[(q_x - q_y) / sqrt(2 (q_x^2 + q_y^2))], i.e. z.
inline double chart_angle(const CanonicalState& cs, double q2) {
    const double u = (cs.qx - cs.qy) / std::sqrt(2.0 * q2);
    return std::asin(std::clamp(u, -1.0, 1.0));
}

}  // namespace detail

inline ExtendedState from_canonical(const CanonicalState& cs) {
    const double q2 = detail::radius_sq(cs);
    return {{-cs.px, -cs.py, detail::chart_angle(cs, q2)}, std::sqrt(0.5 * q2) - 0.5};
}

inline double hamiltonian(const CanonicalState& cs) {
    const double z = detail::chart_angle(cs, detail::radius_sq(cs));
    return 0.5 * (cs.px * cs.px + cs.py * cs.py + z * z);
}

/// (q_x', p_x', q_y', p_y') in proper time.
inline CanonicalState hamilton_rhs(const CanonicalState& cs) {
    const double q2 = detail::radius_sq(cs);
    const double z = detail::chart_angle(cs, q2);
    return {cs.px, -cs.qy / q2 * z, cs.py, cs.qx / q2 * z};
}

/// The same flow in physical time t. Since dtau/dt = r every component is
/// scaled by r.
inline CanonicalState noncanonical_t_rhs(const CanonicalState& cs, double r) {
    if (!(r > 0.0)) throw ConformalFactorVanished("r must be positive");
    const CanonicalState d = hamilton_rhs(cs);
    return {r * d.qx, r * d.px, r * d.qy, r * d.py};
}

struct CanonicalSample {
    double tau = 0.0;
    CanonicalState state;
    double H = 0.0;
};

/// Fixed-step RK4 integration of Hamilton's equations.
inline std::vector<CanonicalSample> integrate_canonical(const CanonicalState& init, double tau_end, double dt,
                                                        std::size_t sample_every = 1) {
    if (!(tau_end > 0.0) || !(dt > 0.0) || sample_every == 0) throw ConfigError("invalid canonical integration settings");
    auto rhs = [](const ode::State<4>& y) { return hamilton_rhs(CanonicalState::from_array(y)).as_array(); };
    const auto steps = static_cast<std::size_t>(std::llround(tau_end / dt));
    const double h = tau_end / static_cast<double>(steps);
    std::vector<CanonicalSample> out;
    out.reserve(steps / sample_every + 2);
    ode::State<4> y = init.as_array();
    out.push_back({0.0, init, hamiltonian(init)});
    for (std::size_t n = 1; n <= steps; ++n) {
        y = ode::rk4_step(rhs, y, h);
        if (n % sample_every == 0 || n == steps) {
            const CanonicalState cs = CanonicalState::from_array(y);
            out.push_back({n == steps ? tau_end : static_cast<double>(n) * h, cs, hamiltonian(cs)});
        }
    }
    return out;
}

inline void write_canonical_csv(std::ostream& out, const std::vector<CanonicalSample>& samples) {
    out << "tau,qx,px,qy,py,H\n";
    for (const auto& s : samples) {
        out << format_double(s.tau) << ',' << format_double(s.state.qx) << ',' << format_double(s.state.px) << ','
            << format_double(s.state.qy) << ',' << format_double(s.state.py) << ',' << format_double(s.H) << '\n';
    }
}

struct EquivalenceReport {
    double sup_discrepancy = 0.0;
    std::size_t samples = 0;
};

/// Integrates the plasma system extended with D = B in proper time, maps each
/// sample through the chart, and compares against a direct integration of
/// Hamilton's equations from the mapped initial state.
///
/// Throws BranchViolation if the initial state or any extended sample leaves
/// the chart's domain.
inline EquivalenceReport flow_equivalence(const ExtendedState& init, double tau_end, double dt) {
    check_branch(init);
    const ConservativeSystem sys = builtins::plasma_particle();
    const ExtensionSpec ext = default_extension(sys);

    IntegratorConfig cfg;
    cfg.method = Method::Rk4;
    cfg.clock = Clock::Proper;
    cfg.end = tau_end;
    cfg.dt = dt;
    const TrajectoryRecord rec = integrate(sys, ext, init, cfg);
    if (rec.status != TerminalStatus::Completed) throw ConformalFactorVanished(rec.message);

    const std::vector<CanonicalSample> direct = integrate_canonical(to_canonical(init), tau_end, dt);
    if (direct.size() != rec.samples.size()) throw Error("sample grids of the two integrations differ");

    EquivalenceReport rep;
    rep.samples = direct.size();
    for (std::size_t i = 0; i < direct.size(); ++i) {
        check_branch(rec.samples[i].state);
        const auto a = to_canonical(rec.samples[i].state).as_array();
        const auto b = direct[i].state.as_array();
        for (std::size_t k = 0; k < 4; ++k) rep.sup_discrepancy = std::max(rep.sup_discrepancy, std::abs(a[k] - b[k]));
    }
    return rep;
}

}  // namespace poissonize::canonical
