#pragma once

// Command implementations behind the `poissonize` executable.
//
// Exit codes: 0 success, 1 tolerance check failed, 2 invalid input
// (usage, JSON, expression, system or geometry errors), 3 conformal factor
// vanished, 4 canonical-chart branch violation, 5 negative equilibrium
// density, 6 adaptive step failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "canonical.hpp"
#include "config.hpp"
#include "consys.hpp"
#include "extension.hpp"
#include "magcoords.hpp"
#include "parallel.hpp"
#include "propertime.hpp"
#include "statmech.hpp"

namespace poissonize::app {

using nlohmann::json;

enum ExitCode : int {
    kOk = 0,
    kToleranceFailed = 1,
    kInvalidInput = 2,
    kConformalVanished = 3,
    kBranchViolation = 4,
    kNegativeDensity = 5,
    kStepFailure = 6,
};

namespace detail {

inline std::string fmt_vec(const Vec3& v) {
    return "(" + format_double(v.x) + ", " + format_double(v.y) + ", " + format_double(v.z) + ")";
}

inline std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    std::filesystem::path p = csv;
    p.replace_extension(".json");
    return p;
}

inline std::filesystem::path output_path(const json& cfg, const std::string& cli_out, const char* key,
                                         const char* fallback) {
    if (!cli_out.empty()) return cli_out;
    if (cfg.contains("outputs") && cfg.at("outputs").contains(key)) return cfg.at("outputs").at(key).get<std::string>();
    return fallback;
}

inline Point3 parse_point(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            v.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("--point must be x,y,z");
        }
    }
    if (v.size() != 3) throw ConfigError("--point must be x,y,z");
    return {v[0], v[1], v[2]};
}

inline double max_energy_drift(const TrajectoryRecord& rec) {
    double d = 0.0;
    for (const auto& s : rec.samples) d = std::max(d, std::abs(s.H - rec.samples.front().H));
    return d;
}

}  // namespace detail

/// Prints local and sampled Jacobi diagnostics.
inline int cmd_diagnose(const json& cfg, const std::string& point_text, std::ostream& out) {
    const ConservativeSystem sys = config::build_system(cfg);
    Point3 p;
    if (!point_text.empty()) p = detail::parse_point(point_text);
    else if (cfg.contains("point")) p = detail::parse_point(cfg.at("point").get<std::string>());
    else if (cfg.contains("initial")) p = config::initial_state(cfg).p;

    const Vec3 w = sys.w(p);
    const Vec3 gh = grad(sys.H, p);
    const Vec3 v = velocity(sys, p);
    // div(w x grad H) = grad H . curl w, since curl grad H = 0.
    const double divv = dot(gh, curl(sys.w, p));

    out << "system: " << sys.name << '\n';
    out << "point: " << detail::fmt_vec(p) << '\n';
    out << "w: " << detail::fmt_vec(w) << '\n';
    out << "grad_H: " << detail::fmt_vec(gh) << '\n';
    out << "v: " << detail::fmt_vec(v) << '\n';
    out << "h: " << format_double(helicity_density(sys.w, p)) << '\n';
    out << "div_v: " << format_double(divv) << '\n';
    out << "constraint_residual: " << format_double(constraint_residual(sys, p)) << '\n';

    const json dj = cfg.value("diagnose", json::object());
    const Box3 box = config::parse_box(dj.value("box", json()), Box3::cube(1.0));
    const auto samples = dj.value("samples", std::size_t{4096});
    const double tol = dj.value("tol_h", kDefaultHelicityTol);
    const JacobiReport rep = classify_jacobi(sys, box, samples, tol);
    out << "classification: " << to_string(rep.kind) << '\n';
    out << "max_abs_h: " << format_double(rep.max_abs_h) << '\n';
    out << "argmax: " << detail::fmt_vec(rep.argmax) << '\n';
    out << "samples: " << rep.samples << '\n';

    if (cfg.contains("extension") || sys.B) {
        const ExtensionSpec ext = config::build_extension(cfg, sys);
        const double s = cfg.contains("initial") ? config::initial_state(cfg).s : 0.0;
        const ExtendedState st{p, s};
        out << "D: " << ext.d_name << '\n';
        out << "D_closedness_residual: " << format_double(ext.closedness_residual) << '\n';
        out << "abc: " << detail::fmt_vec(abc_coefficients(sys, ext, st)) << '\n';
        out << "r_signed: " << format_double(conformal_factor_unchecked(sys, ext, st).signed_value) << '\n';
    }

    if (cfg.contains("magnetic_coordinates")) {
        const json& mj = cfg.at("magnetic_coordinates");
        const auto geo = config::build_geometry(mj);
        const auto mp = mj.value("point", std::vector<double>{0.5, 0.5, 0.5, 0.0});
        if (mp.size() != 4) throw ConfigError("magnetic_coordinates.point must be [ell, psi, zeta, s]");
        const magcoords::MagPoint pt{mp[0], mp[1], mp[2], mp[3]};
        const auto op = magcoords::mag_operator(geo, pt);
        out << "mag_operator: " << detail::fmt_vec({op.zeta_psi, op.ell_zeta, op.ell_psi}) << '\n';
        out << "mag_kernel: " << detail::fmt_vec(magcoords::mag_kernel_covector(geo, pt)) << '\n';
        out << "mag_r: " << format_double(magcoords::mag_conformal_factor(geo, pt)) << '\n';
    }
    return kOk;
}

/// Runs a trajectory and writes the CSV plus a JSON sidecar.
inline int cmd_simulate(const json& cfg, const std::string& out_path, std::ostream& out) {
    const ConservativeSystem sys = config::build_system(cfg);
    const ExtensionSpec ext = config::build_extension(cfg, sys);
    const ExtendedState init = config::initial_state(cfg);
    const IntegratorConfig ic = config::build_integrator(cfg);
    const auto csv_path = detail::output_path(cfg, out_path, "trajectory", "trajectory.csv");

    if (cfg.value("flow", std::string("extended")) == "canonical") {
        canonical::check_branch(init);
        if (sys.name != "plasma_particle") throw ConfigError("the canonical flow is defined for plasma_particle only");
        const auto samples =
            canonical::integrate_canonical(canonical::to_canonical(init), ic.end, ic.dt, ic.sample_every);
        auto f = detail::open_out(csv_path);
        canonical::write_canonical_csv(f, samples);
        double drift = 0.0;
        for (const auto& s : samples) drift = std::max(drift, std::abs(s.H - samples.front().H));
        detail::write_json(detail::sidecar_path(csv_path),
                           {{"status", "completed"}, {"flow", "canonical"}, {"samples", samples.size()},
                            {"method", "rk4"}, {"step", ic.dt}, {"H_drift", drift}});
        out << "wrote " << samples.size() << " canonical samples to " << csv_path.string() << '\n';
        return kOk;
    }

    const TrajectoryRecord rec = integrate(sys, ext, init, ic);
    {
        auto f = detail::open_out(csv_path);
        write_trajectory_csv(f, rec);
    }
    json side = {{"status", to_string(rec.status)},
                 {"message", rec.message},
                 {"flow", "extended"},
                 {"system", rec.system_name},
                 {"D", rec.d_name},
                 {"method", rec.method},
                 {"clock", rec.clock},
                 {"step", rec.step},
                 {"samples", rec.samples.size()},
                 {"H_drift", detail::max_energy_drift(rec)}};
    if (cfg.contains("casimir")) {
        const ScalarField3 C = expr::parse_field(cfg.at("casimir").get<std::string>());
        side["casimir_drift"] = casimir_drift(C, rec);
    }
    detail::write_json(detail::sidecar_path(csv_path), side);
    out << "wrote " << rec.samples.size() << " samples to " << csv_path.string() << " (" << to_string(rec.status)
        << ")\n";
    if (rec.status == TerminalStatus::ConformalFactorVanished) return kConformalVanished;
    if (rec.status == TerminalStatus::StepFailure) return kStepFailure;
    return kOk;
}

inline int cmd_canonical_check(const json& cfg, std::optional<double> tol_arg, std::ostream& out) {
    const ConservativeSystem sys = config::build_system(cfg);
    if (sys.name != "plasma_particle") throw ConfigError("canonical-check is defined for plasma_particle only");
    const ExtendedState init = config::initial_state(cfg);
    const json cj = cfg.value("canonical", json::object());
    const double tau_end = cj.value("tau_end", 10.0);
    const double dt = cj.value("dt", 1e-3);
    const double tol = tol_arg ? *tol_arg : cj.value("tol", 1e-6);
    const auto rep = canonical::flow_equivalence(init, tau_end, dt);
    const bool pass = rep.sup_discrepancy < tol;
    out << "sup_discrepancy: " << format_double(rep.sup_discrepancy) << '\n';
    out << "tolerance: " << format_double(tol) << '\n';
    out << "samples: " << rep.samples << '\n';
    out << "result: " << (pass ? "pass" : "fail") << '\n';
    return pass ? kOk : kToleranceFailed;
}

inline void write_grid(const statmech::EquilibriumGrid& grid, const std::filesystem::path& csv_path) {
    const auto& ax = grid.axes;
    {
        auto f = detail::open_out(csv_path);
        f << statmech::axis_name(ax.axis0) << ',' << statmech::axis_name(ax.axis1) << ",F\n";
        for (std::size_t j = 0; j < ax.n1; ++j)
            for (std::size_t i = 0; i < ax.n0; ++i)
                f << format_double(ax.coord0(i)) << ',' << format_double(ax.coord1(j)) << ','
                  << format_double(grid.at(i, j)) << '\n';
    }
    json axes = json::object();
    axes[statmech::axis_name(ax.axis0)] = {ax.lo0, ax.hi0, ax.n0};
    axes[statmech::axis_name(ax.axis1)] = {ax.lo1, ax.hi1, ax.n1};
    axes[statmech::axis_name(ax.fixed_axis())] = ax.fixed;
    detail::write_json(detail::sidecar_path(csv_path), {{"beta", grid.spec.beta},
                                                        {"delta_s", grid.spec.delta_s},
                                                        {"Z", grid.spec.Z},
                                                        {"axes", axes},
                                                        {"system", grid.system_name},
                                                        {"D", grid.d_name},
                                                        {"quadrature_error", grid.quadrature_error}});
}

inline int cmd_equilibrium(const json& cfg, const std::string& out_path, std::ostream& out) {
    const ConservativeSystem sys = config::build_system(cfg);
    const ExtensionSpec ext = config::build_extension(cfg, sys);
    const auto es = config::build_equilibrium(cfg);
    const auto grid = statmech::equilibrium_grid(sys, ext, es.beta, es.delta_s, es.axes, thread_cap_from_env());
    const auto csv_path = detail::output_path(cfg, out_path, "grid", "equilibrium.csv");
    write_grid(grid, csv_path);
    out << "wrote " << grid.values.size() << " grid values to " << csv_path.string()
        << " (Z = " << format_double(grid.spec.Z) << ")\n";
    return kOk;
}

/// Writes preset data plus a manifest describing what to plot.
inline int cmd_figure(const std::string& name, const std::string& outdir_arg, std::ostream& out) {
    const json cfg = config::preset(name);  // throws ConfigError for unknown names
    const std::filesystem::path outdir = outdir_arg.empty() ? std::filesystem::path("figures") : std::filesystem::path(outdir_arg);
    std::filesystem::create_directories(outdir);
    const std::string data_file = name + (name == "fig3" ? "_grid.csv" : "_trajectory.csv");
    const auto data_path = outdir / data_file;

    std::ostringstream sink;
    int rc = name == "fig3" ? cmd_equilibrium(cfg, data_path.string(), sink) : cmd_simulate(cfg, data_path.string(), sink);
    if (rc != kOk) return rc;

    json manifest = {{"figure", name}, {"files", json::array()}, {"panels", json::array()}};
    if (name == "fig1a" || name == "fig1b") {
        manifest["kind"] = "trajectory3d";
        manifest["files"].push_back(
            {{"path", data_file}, {"columns", {"tau", "t", "x", "y", "z", "s", "H", "r", "h", "constraint_residual"}}});
        manifest["panels"].push_back({{"kind", "curve3d"}, {"file", data_file}, {"x", "x"}, {"y", "y"}, {"z", "z"}});
    } else if (name == "fig2") {
        manifest["kind"] = "timeseries";
        manifest["files"].push_back({{"path", data_file}, {"columns", {"tau", "qx", "px", "qy", "py", "H"}}});
        manifest["panels"].push_back({{"kind", "lines"},
                                      {"file", data_file},
                                      {"x", "tau"},
                                      {"y", {"px", "qx/tau", "py", "qy/tau"}}});
        manifest["panels"].push_back(
            {{"kind", "lines"}, {"file", data_file}, {"x", "tau"}, {"y", {"(s+1/2)/tau", "z"}},
             {"derived",
              {{"s+1/2", "sqrt((qx^2+qy^2)/2)"}, {"z", "arcsin((qx-qy)/sqrt(2*(qx^2+qy^2)))"}}}});
    } else {
        manifest["kind"] = "heatmap";
        manifest["files"].push_back({{"path", data_file}, {"columns", {"x", "y", "F"}}, {"sidecar", name + "_grid.json"}});
        manifest["panels"].push_back({{"kind", "heatmap"}, {"file", data_file}, {"x", "x"}, {"y", "y"}, {"value", "F"}});
    }
    detail::write_json(outdir / (name + "_manifest.json"), manifest);
    out << sink.str();
    out << "wrote " << (outdir / (name + "_manifest.json")).string() << '\n';
    return kOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App cli{"Poissonization of three-dimensional conservative systems"};
    cli.require_subcommand(1);
    std::string config_path, out_path, point, figure_name;
    std::optional<double> tol;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "JSON run configuration");
        if (needs_config) opt->required();
        sub->add_option("--out", out_path, "output path");
        sub->add_option("--point", point, "evaluation point x,y,z");
        sub->add_option("--tol", tol, "tolerance");
    };
    auto* diag = cli.add_subcommand("diagnose", "helicity and Jacobi diagnostics");
    auto* sim = cli.add_subcommand("simulate", "integrate a trajectory");
    auto* canon = cli.add_subcommand("canonical-check", "extended vs canonical flow equivalence");
    auto* equil = cli.add_subcommand("equilibrium", "tabulate the equilibrium marginal");
    auto* fig = cli.add_subcommand("figure", "emit figure data and manifest");
    for (auto* s : {diag, sim, canon, equil}) add_common(s, true);
    add_common(fig, false);
    fig->add_option("name", figure_name, "fig1a | fig1b | fig2 | fig3")->required();

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, eo;
        const int code = cli.exit(e, o, eo);
        out << o.str();
        err << eo.str();
        return code == 0 ? kOk : kInvalidInput;
    }

    try {
        if (*fig) return cmd_figure(figure_name, out_path, out);
        const json cfg = config::load(config_path);
        if (*diag) return cmd_diagnose(cfg, point, out);
        if (*sim) return cmd_simulate(cfg, out_path, out);
        if (*canon) return cmd_canonical_check(cfg, tol, out);
        if (*equil) return cmd_equilibrium(cfg, out_path, out);
    } catch (const SyntaxError& e) {
        err << "SyntaxError: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const ConformalFactorVanished& e) {
        err << "ConformalFactorVanished: " << e.what() << '\n';
        return kConformalVanished;
    } catch (const BranchViolation& e) {
        err << "BranchViolation: " << e.what() << '\n';
        return kBranchViolation;
    } catch (const NegativeDensity& e) {
        err << "NegativeDensity: " << e.what() << '\n';
        return kNegativeDensity;
    } catch (const StepFailure& e) {
        err << "StepFailure: " << e.what() << '\n';
        return kStepFailure;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kInvalidInput;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kInvalidInput;
    }
    return kInvalidInput;
}

}  // namespace poissonize::app
