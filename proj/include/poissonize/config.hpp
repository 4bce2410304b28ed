#pragma once

// JSON run configuration: system, extension, integrator, equilibrium grid and
// magnetic-coordinate geometry. Expressions are exprlang strings.

#include <array>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "canonical.hpp"
#include "consys.hpp"
#include "expr.hpp"
#include "extension.hpp"
#include "magcoords.hpp"
#include "propertime.hpp"
#include "statmech.hpp"

namespace poissonize::config {

using nlohmann::json;

/// Built-in presets for the figure data. Initial conditions are artifact
/// choices, not values from the literature.
inline json preset(const std::string& name) {
    const double two_pi = 2.0 * std::numbers::pi;
    if (name == "fig1a")
        return {{"system", {{"builtin", "plasma_particle"}}},
                {"extension", {{"D", "B"}}},
                {"initial", {1.0, 1.0, 0.5, 0.0}},
                {"integrator", {{"method", "rk4"}, {"clock", "physical"}, {"dt", 1e-3}, {"t_end", 100.0},
                                {"sample_every", 10}}},
                {"casimir", "0.5*(x^2+y^2+z^2)"}};
    if (name == "fig1b")
        return {{"system", {{"builtin", "rigid_body"}, {"inertia", {1.0, 2.0, 3.0}}}},
                {"extension", {{"D", "w"}}},
                {"initial", {1.0, 1.0, 1.0, 0.0}},
                {"integrator", {{"method", "rk4"}, {"clock", "physical"}, {"dt", 1e-3}, {"t_end", 50.0},
                                {"sample_every", 10}}},
                {"casimir", "0.5*(x^2+y^2+z^2)"}};
    if (name == "fig2")
        return {{"system", {{"builtin", "plasma_particle"}}},
                {"extension", {{"D", "B"}}},
                {"flow", "canonical"},
                {"initial", {1.0, 1.0, 0.5, 0.0}},
                {"integrator", {{"method", "rk4"}, {"clock", "proper"}, {"dt", 1e-3}, {"tau_end", 100.0},
                                {"sample_every", 10}}}};
    if (name == "fig3")
        return {{"system", {{"builtin", "nonintegrable_exb"}, {"phi", "0"}}},
                {"extension", {{"D", "B"}, {"probe_box", {{0.0, two_pi}, {0.0, two_pi}, {-1.0, 1.0}}}}},
                {"equilibrium", {{"beta", 1.0},
                                 {"delta_s", 1.0},
                                 {"axes", {{"x", {0.0, two_pi, 201}}, {"y", {0.0, two_pi, 201}}, {"z", 0.0}}}}}};
    throw ConfigError("unknown preset '" + name + "'");
}

/// Reads a config file; a "preset" key is expanded first and the rest of the
/// document is merged over it (RFC 7386 merge patch).
inline json load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (doc.contains("preset")) {
        json base = preset(doc.at("preset").get<std::string>());
        json patch = doc;
        patch.erase("preset");
        base.merge_patch(patch);
        return base;
    }
    return doc;
}

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

inline const json& require(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
    return j.at(key);
}

inline std::string expr_string(const json& j, const char* what) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number()) return nlohmann::json(j).dump();
    throw ConfigError(std::string(what) + " must be an expression string");
}

inline VectorField3 vector_expr(const json& j, const char* what,
                                const expr::VariableNames& vars = expr::VariableNames::cartesian()) {
    if (!j.is_array() || j.size() != 3) throw ConfigError(std::string(what) + " must be three expressions");
    return expr::parse_vector_field(expr_string(j[0], what), expr_string(j[1], what), expr_string(j[2], what), vars);
}

}  // namespace detail

inline Box3 parse_box(const json& j, const Box3& fallback) {
    if (j.is_null()) return fallback;
    if (!j.is_array() || j.size() != 3) throw ConfigError("box must be [[lo,hi],[lo,hi],[lo,hi]]");
    Box3 b;
    for (int k = 0; k < 3; ++k) {
        const auto& r = j[static_cast<std::size_t>(k)];
        if (!r.is_array() || r.size() != 2) throw ConfigError("box must be [[lo,hi],[lo,hi],[lo,hi]]");
        b.lo[k] = r[0].get<double>();
        b.hi[k] = r[1].get<double>();
        if (!(b.hi[k] > b.lo[k])) throw ConfigError("box ranges must satisfy lo < hi");
    }
    return b;
}

inline ConservativeSystem build_system(const json& cfg) {
    const json& sj = detail::require(cfg, "system");
    if (sj.contains("custom")) {
        const json& c = sj.at("custom");
        ConservativeSystem sys;
        sys.name = detail::get_or<std::string>(sj, "name", "custom");
        sys.w = detail::vector_expr(json::array({detail::require(c, "wx"), detail::require(c, "wy"),
                                                 detail::require(c, "wz")}),
                                    "custom w");
        sys.H = expr::parse_field(detail::expr_string(detail::require(c, "H"), "custom H"));
        return sys;
    }
    const std::string name = detail::get_or<std::string>(sj, "builtin", "");
    if (name == "plasma_particle") return builtins::plasma_particle();
    if (name == "rigid_body") {
        const auto I = detail::get_or<std::array<double, 3>>(sj, "inertia", {1.0, 2.0, 3.0});
        return builtins::rigid_body({I[0], I[1], I[2]});
    }
    if (name == "exb") {
        VectorField3 B = detail::vector_expr(detail::require(sj, "B"), "B");
        ScalarField3 phi = expr::parse_field(detail::expr_string(detail::require(sj, "phi"), "phi"));
        const Box3 box = parse_box(sj.value("probe_box", json()), Box3::cube(1.0));
        return builtins::exb(std::move(B), std::move(phi), box);
    }
    if (name == "nonintegrable_exb") {
        const std::string phi = sj.contains("phi") ? detail::expr_string(sj.at("phi"), "phi") : "0";
        return builtins::nonintegrable_exb(expr::parse_field(phi));
    }
    throw UnknownSystem("unknown system '" + name + "'");
}

inline ExtensionSpec build_extension(const json& cfg, const ConservativeSystem& sys) {
    const json ej = cfg.value("extension", json::object());
    const Box3 box = parse_box(ej.value("probe_box", json()), Box3::cube(1.0));
    const double floor = detail::get_or<double>(ej, "r_floor", kDefaultRFloor);
    const json d = ej.value("D", json());
    if (d.is_null()) {
        ExtensionSpec ext = default_extension(sys, box);
        ext.r_floor = floor;
        return ext;
    }
    if (d.is_string()) {
        const std::string key = d.get<std::string>();
        if (key == "B") {
            if (!sys.B) throw ConfigError("D = B requires an E x B system");
            return make_extension(*sys.B, "B", Closedness::Require, box, floor);
        }
        if (key == "w") return make_extension(sys.w, "w", Closedness::Report, box, floor);
        throw ConfigError("extension.D must be \"B\", \"w\" or three expressions");
    }
    return make_extension(detail::vector_expr(d, "D"), "custom", Closedness::Require, box, floor);
}

inline ExtendedState initial_state(const json& cfg) {
    const auto v = detail::get_or<std::vector<double>>(cfg, "initial", {});
    if (v.size() == 3) return {{v[0], v[1], v[2]}, 0.0};
    if (v.size() == 4) return {{v[0], v[1], v[2]}, v[3]};
    throw ConfigError("initial must be [x, y, z] or [x, y, z, s]");
}

inline IntegratorConfig build_integrator(const json& cfg) {
    const json ij = cfg.value("integrator", json::object());
    IntegratorConfig ic;
    const std::string method = detail::get_or<std::string>(ij, "method", "rk4");
    if (method == "rk4") ic.method = Method::Rk4;
    else if (method == "rkf45") ic.method = Method::Rkf45;
    else throw ConfigError("integrator.method must be rk4 or rkf45");
    const std::string clock = detail::get_or<std::string>(ij, "clock", "proper");
    if (clock == "proper") ic.clock = Clock::Proper;
    else if (clock == "physical") ic.clock = Clock::Physical;
    else throw ConfigError("integrator.clock must be proper or physical");
    const char* end_key = ic.clock == Clock::Proper ? "tau_end" : "t_end";
    ic.end = detail::get_or<double>(ij, end_key, 10.0);
    ic.dt = detail::get_or<double>(ij, "dt", 1e-3);
    ic.sample_every = detail::get_or<std::size_t>(ij, "sample_every", 1);
    ic.tol_rel = detail::get_or<double>(ij, "tol_rel", ic.tol_rel);
    ic.tol_abs = detail::get_or<double>(ij, "tol_abs", ic.tol_abs);
    ic.dt_min = detail::get_or<double>(ij, "dt_min", ic.dt_min);
    ic.dt_max = detail::get_or<double>(ij, "dt_max", ic.dt_max);
    ic.validate();
    return ic;
}

struct EquilibriumSettings {
    double beta = 0.0;
    double delta_s = 1.0;
    statmech::GridAxes axes;
};

inline EquilibriumSettings build_equilibrium(const json& cfg) {
    const json& ej = detail::require(cfg, "equilibrium");
    EquilibriumSettings es;
    es.beta = detail::get_or<double>(ej, "beta", 0.0);
    es.delta_s = detail::get_or<double>(ej, "delta_s", 1.0);
    const json& ax = detail::require(ej, "axes");
    int count = 0;
    for (int a = 0; a < 3; ++a) {
        const char* key = statmech::axis_name(a);
        const json v = ax.value(key, json());
        if (v.is_array()) {
            if (v.size() != 3 || count == 2) throw ConfigError("axes need exactly two [lo, hi, n] ranges");
            ++count;
            const double lo = v[0].get<double>(), hi = v[1].get<double>();
            const auto n = v[2].get<std::size_t>();
            if (count == 1) {
                es.axes.axis0 = a;
                es.axes.lo0 = lo;
                es.axes.hi0 = hi;
                es.axes.n0 = n;
            } else {
                es.axes.axis1 = a;
                es.axes.lo1 = lo;
                es.axes.hi1 = hi;
                es.axes.n1 = n;
            }
        } else if (v.is_number()) {
            es.axes.fixed = v.get<double>();
        }
    }
    if (count != 2) throw ConfigError("axes need exactly two [lo, hi, n] ranges");
    es.axes.validate();
    return es;
}

inline magcoords::MagGeometry build_geometry(const json& mj) {
    const auto vars = expr::VariableNames::magnetic();
    auto field = [&](const char* key, const char* fallback) {
        const std::string src = mj.contains(key) ? detail::expr_string(mj.at(key), key) : std::string(fallback);
        return expr::parse_field(src, vars);
    };
    magcoords::MagGeometry geo{field("alpha", "1"), field("beta", "0"), field("i", "0"), field("rho", "1"),
                               field("q", "0"),     field("R", "1"),    field("gpp", "1")};
    const Box3 box = parse_box(mj.value("probe_box", json()), Box3{{0.0, 0.1, 0.0}, {1.0, 1.0, 1.0}});
    return magcoords::validated(std::move(geo), box);
}

}  // namespace poissonize::config
