#pragma once

// Equilibrium distributions. The Gibbs density P = exp(-beta H) / Z lives on
// the canonical volume; pulled back to (x, y, z, s) it becomes
// f = P (w.D + s h), and integrating s over [0, delta_s] gives
// F = (delta_s / Z)(w.D + delta_s h / 2) exp(-beta H).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "consys.hpp"
#include "extension.hpp"
#include "parallel.hpp"

namespace poissonize::statmech {

struct EquilibriumSpec {
    double beta = 0.0;
    double delta_s = 1.0;
    double Z = 1.0;

    void validate() const {
        if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
        if (!(delta_s > 0.0)) throw ConfigError("delta_s must be positive");
        if (!(Z > 0.0)) throw ConfigError("Z must be positive");
    }
};

inline double gibbs_P(double H_value, const EquilibriumSpec& spec) { return std::exp(-spec.beta * H_value) / spec.Z; }

namespace detail {

struct LocalTerms {
    double H, wD, h;
};

inline LocalTerms local_terms(const ConservativeSystem& sys, const ExtensionSpec& ext, const Point3& p) {
    return {require_finite(sys.H(p), "H"), dot(require_finite(sys.w(p), "w"), require_finite(ext.D(p), "D")),
            helicity_density(sys.w, p)};
}

}  // namespace detail

/// f = P(H) (w.D + s h).
inline double f_density(const ConservativeSystem& sys, const ExtensionSpec& ext, const ExtendedState& st,
                        const EquilibriumSpec& spec) {
    const auto t = detail::local_terms(sys, ext, st.p);
    return gibbs_P(t.H, spec) * (t.wD + st.s * t.h);
}

/// Closed-form s-marginal over s in [0, delta_s].
inline double F_marginal(const ConservativeSystem& sys, const ExtensionSpec& ext, const Point3& p,
                         const EquilibriumSpec& spec) {
    const auto t = detail::local_terms(sys, ext, p);
    return spec.delta_s / spec.Z * (t.wD + 0.5 * spec.delta_s * t.h) * std::exp(-spec.beta * t.H);
}

/// Two tabulated coordinates on a uniform grid; the third is held fixed.
struct GridAxes {
    int axis0 = 0;  // column coordinate (0 = x, 1 = y, 2 = z)
    int axis1 = 1;  // row coordinate
    double lo0 = 0.0, hi0 = 1.0;
    double lo1 = 0.0, hi1 = 1.0;
    std::size_t n0 = 3, n1 = 3;
    double fixed = 0.0;

    int fixed_axis() const { return 3 - axis0 - axis1; }
    double step0() const { return (hi0 - lo0) / static_cast<double>(n0 - 1); }
    double step1() const { return (hi1 - lo1) / static_cast<double>(n1 - 1); }
    double coord0(std::size_t i) const { return i + 1 == n0 ? hi0 : lo0 + static_cast<double>(i) * step0(); }
    double coord1(std::size_t j) const { return j + 1 == n1 ? hi1 : lo1 + static_cast<double>(j) * step1(); }

    Point3 point(std::size_t i, std::size_t j) const {
        Point3 p;
        p[axis0] = coord0(i);
        p[axis1] = coord1(j);
        p[fixed_axis()] = fixed;
        return p;
    }

    void validate() const {
        if (axis0 < 0 || axis0 > 2 || axis1 < 0 || axis1 > 2 || axis0 == axis1)
            throw ConfigError("grid axes must be two distinct coordinates");
        if (!(hi0 > lo0) || !(hi1 > lo1)) throw ConfigError("grid ranges must be non-empty");
        if (n0 < 3 || n1 < 3 || n0 % 2 == 0 || n1 % 2 == 0)
            throw ConfigError("Simpson quadrature needs an odd node count >= 3 on each axis");
    }
};

inline const char* axis_name(int a) { return a == 0 ? "x" : (a == 1 ? "y" : "z"); }

struct EquilibriumGrid {
    GridAxes axes;
    /// Row-major: values[j * n0 + i] at (coord0(i), coord1(j)).
    std::vector<double> values;
    std::string system_name;
    std::string d_name;
    EquilibriumSpec spec;
    /// Richardson estimate |S_h - S_2h| / 15 of the relative error in Z
    /// (zero when the grid is too coarse to halve).
    double quadrature_error = 0.0;

    double at(std::size_t i, std::size_t j) const { return values[j * axes.n0 + i]; }
};

/// Composite Simpson rule over a uniform 2D grid using every `stride`-th node.
inline double simpson_2d(std::span<const double> v, const GridAxes& ax, std::size_t stride = 1) {
    auto weight = [](std::size_t k, std::size_t n) {
        if (k == 0 || k + 1 == n) return 1.0;
        return k % 2 == 1 ? 4.0 : 2.0;
    };
    const std::size_t m0 = (ax.n0 - 1) / stride + 1, m1 = (ax.n1 - 1) / stride + 1;
    double acc = 0.0;
    for (std::size_t j = 0; j < m1; ++j)
        for (std::size_t i = 0; i < m0; ++i)
            acc += weight(i, m0) * weight(j, m1) * v[j * stride * ax.n0 + i * stride];
    const double h0 = ax.step0() * static_cast<double>(stride), h1 = ax.step1() * static_cast<double>(stride);
    return acc * h0 * h1 / 9.0;
}

/// Tabulates F over `axes`, computes Z by Simpson quadrature of the
/// unnormalized marginal and normalizes. Throws NegativeDensity if
/// w.D + s h < 0 for some node and some s in [0, delta_s].
inline EquilibriumGrid equilibrium_grid(const ConservativeSystem& sys, const ExtensionSpec& ext, double beta,
                                        double delta_s, const GridAxes& axes, unsigned threads = 1) {
    axes.validate();
    EquilibriumSpec spec{beta, delta_s, 1.0};
    spec.validate();

    EquilibriumGrid grid;
    grid.axes = axes;
    grid.system_name = sys.name;
    grid.d_name = ext.d_name;
    grid.values.assign(axes.n0 * axes.n1, 0.0);

    parallel_for(axes.n1, threads, [&](std::size_t j) {
        for (std::size_t i = 0; i < axes.n0; ++i) {
            const Point3 p = axes.point(i, j);
            const auto t = detail::local_terms(sys, ext, p);
            // f is linear in s, so its sign on [0, delta_s] is set by the endpoints.
            if (t.wD < 0.0 || t.wD + delta_s * t.h < 0.0)
                throw NegativeDensity("w.D + s h < 0 at (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                      ", " + std::to_string(p.z) + ")");
            grid.values[j * axes.n0 + i] = delta_s * (t.wD + 0.5 * delta_s * t.h) * std::exp(-beta * t.H);
        }
    });

    const double Z = simpson_2d(grid.values, axes);
    if (!(Z > 0.0) || !std::isfinite(Z)) throw NegativeDensity("normalization integral is not positive");
    if ((axes.n0 - 1) % 4 == 0 && (axes.n1 - 1) % 4 == 0)
        grid.quadrature_error = std::abs(Z - simpson_2d(grid.values, axes, 2)) / 15.0 / Z;
    for (double& v : grid.values) v /= Z;
    spec.Z = Z;
    grid.spec = spec;
    return grid;
}

/// Differential entropy -sum P log P * cell_volume (cells with P = 0 contribute 0).
inline double entropy(std::span<const double> P, double cell_volume) {
    double acc = 0.0;
    for (double p : P) {
        if (p < 0.0) throw NegativeDensity("negative probability density");
        if (p > 0.0) acc -= p * std::log(p);
    }
    return acc * cell_volume;
}

/// Discrete Gibbs density on cells with energies H: sum P * cell_volume = 1.
inline std::vector<double> gibbs_distribution(std::span<const double> H, double beta, double cell_volume) {
    std::vector<double> P(H.size());
    const double hmin = H.empty() ? 0.0 : *std::min_element(H.begin(), H.end());
    double norm = 0.0;
    for (std::size_t k = 0; k < H.size(); ++k) {
        P[k] = std::exp(-beta * (H[k] - hmin));
        norm += P[k];
    }
    for (double& p : P) p /= norm * cell_volume;
    return P;
}

struct MaximalityReport {
    std::size_t trials = 0;
    std::size_t passed = 0;
    /// Largest Sigma(P + eps delta) - Sigma(P) over the trials.
    double max_gain = 0.0;

    bool all_passed() const { return passed == trials; }
};

/// Perturbs P by eps * delta, with delta random and projected so that it
/// preserves normalization (sum delta = 0) and mean energy (sum delta H = 0).
/// Each delta is scaled to max |delta_k| / P_k = 1 so P stays positive. A
/// trial passes when the entropy does not increase.
inline MaximalityReport entropy_perturbation_test(std::span<const double> P, std::span<const double> H,
                                                  double cell_volume, std::size_t trials, double eps,
                                                  std::uint64_t seed = 20180713) {
    if (P.size() != H.size() || P.size() < 3) throw ConfigError("need at least 3 cells with matching P and H");
    const std::size_t n = P.size();
    // Orthonormal basis of span{1, H} for the projection.
    std::vector<double> e1(n, 1.0 / std::sqrt(static_cast<double>(n))), e2(H.begin(), H.end());
    double c = 0.0;
    for (std::size_t k = 0; k < n; ++k) c += e2[k] * e1[k];
    double nrm = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        e2[k] -= c * e1[k];
        nrm += e2[k] * e2[k];
    }
    const bool h_independent = nrm > 1e-24;
    if (h_independent)
        for (double& v : e2) v /= std::sqrt(nrm);

    const double base = entropy(P, cell_volume);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    MaximalityReport rep;
    rep.trials = trials;
    rep.max_gain = -std::numeric_limits<double>::infinity();
    std::vector<double> delta(n), perturbed(n);
    for (std::size_t t = 0; t < trials; ++t) {
        for (double& d : delta) d = gauss(rng);
        for (const auto* basis : {&e1, h_independent ? &e2 : nullptr}) {
            if (!basis) continue;
            double proj = 0.0;
            for (std::size_t k = 0; k < n; ++k) proj += delta[k] * (*basis)[k];
            for (std::size_t k = 0; k < n; ++k) delta[k] -= proj * (*basis)[k];
        }
        double ratio = 0.0;
        for (std::size_t k = 0; k < n; ++k) ratio = std::max(ratio, std::abs(delta[k]) / P[k]);
        for (std::size_t k = 0; k < n; ++k) perturbed[k] = P[k] + eps * delta[k] / ratio;
        const double gain = entropy(perturbed, cell_volume) - base;
        rep.max_gain = std::max(rep.max_gain, gain);
        if (gain <= 0.0) ++rep.passed;
    }
    return rep;
}

/// Entropy maximality of the Gibbs density over cells with energies H.
inline MaximalityReport gibbs_maximality_check(std::span<const double> H, double beta, double cell_volume,
                                               std::size_t trials = 100, double eps = 1e-3,
                                               std::uint64_t seed = 20180713) {
    const std::vector<double> P = gibbs_distribution(H, beta, cell_volume);
    return entropy_perturbation_test(P, H, cell_volume, trials, eps, seed);
}

}  // namespace poissonize::statmech
