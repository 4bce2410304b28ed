#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fd_oracle.hpp"
#include "poissonize/expr.hpp"
#include "poissonize/extension.hpp"

using namespace poissonize;
using builtins::nonintegrable_exb;
using builtins::plasma_particle;
using builtins::rigid_body;

namespace {

constexpr double kPi = std::numbers::pi;

ExtendedState random_state(std::mt19937_64& rng, double lo, double hi, double slo, double shi) {
    std::uniform_real_distribution<double> u(slo, shi);
    return {fd::random_point(rng, lo, hi), u(rng)};
}

std::array<double, 4> as4(const ExtendedVelocity& v) { return {v.spatial.x, v.spatial.y, v.spatial.z, v.ds_dt}; }

ExtendedState shift(ExtendedState st, int axis, double d) {
    if (axis == 3)
        st.s += d;
    else
        st.p[axis] += d;
    return st;
}

// Fourth-order five-point stencil, independent of the library's evaluator.
template <class F>
auto d4(F f, const ExtendedState& st, int axis, double h) {
    auto a = f(shift(st, axis, -2 * h)), b = f(shift(st, axis, -h)), c = f(shift(st, axis, h)),
         d = f(shift(st, axis, 2 * h));
    auto out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (a[i] - 8 * b[i] + 8 * c[i] - d[i]) / (12 * h);
    return out;
}

double oracle_divergence(const ConservativeSystem& sys, const ExtensionSpec& ext, const ExtendedState& st) {
    double total = 0.0;
    for (int axis = 0; axis < 4; ++axis) {
        const auto f = [&](const ExtendedState& x) { return as4(extended_velocity(sys, ext, x)); };
        total += d4(f, st, axis, 1e-3)[axis];
    }
    return total;
}

double oracle_jacobi(const ConservativeSystem& sys, const ExtensionSpec& ext, const ExtendedState& st, bool scaled) {
    using Flat = std::array<double, 16>;
    auto op = [&](const ExtendedState& x) {
        const Mat4 m = extended_operator(sys, ext, x);
        const double r = scaled ? conformal_factor(sys, ext, x).signed_value : 1.0;
        Flat f;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) f[4 * i + j] = m[i][j] / r;
        return f;
    };
    const Flat k = op(st);
    std::array<Flat, 4> dk;
    for (int a = 0; a < 4; ++a) dk[a] = d4(op, st, a, 1e-3);
    auto term = [&](int i, int j, int l) {
        double acc = 0.0;
        for (int m = 0; m < 4; ++m) acc += k[4 * i + m] * dk[m][4 * j + l];
        return acc;
    };
    double worst = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            for (int l = j + 1; l < 4; ++l)
                worst = std::max(worst, std::abs(term(i, j, l) + term(j, l, i) + term(l, i, j)));
    return worst;
}

const ConservativeSystem& constant_system() {
    static const ConservativeSystem sys{"const", VectorField3::constant({1, 2, 3}),
                                        ScalarField3([](const Point3&) { return 0.0; },
                                                     [](const Point3&) { return Vec3{0.5, -1, 2}; }, "linear"),
                                        std::nullopt};
    return sys;
}

}  // namespace

TEST(Abc, PlasmaExample) {
    const auto sys = plasma_particle();
    const Vec3 abc = abc_coefficients(sys, default_extension(sys), {{1, 0, kPi / 2}, 0});
    EXPECT_NEAR(abc.x, 0.5, 1e-15);
    EXPECT_NEAR(abc.y, -0.5, 1e-15);
    EXPECT_NEAR(abc.z, 0.0, 1e-15);
}

TEST(Abc, ZeroSGivesD) {
    const auto sys = nonintegrable_exb();
    const auto ext = default_extension(sys);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 20; ++i) {
        const Point3 p = fd::random_point(rng, -2, 2);
        const Vec3 abc = abc_coefficients(sys, ext, {p, 0.0});
        const Vec3 d = ext.D(p);
        for (int k = 0; k < 3; ++k) EXPECT_EQ(abc[k], d[k]);
    }
}

TEST(Abc, RigidBodyIndependentOfS) {
    const auto sys = rigid_body({1, 2, 3});
    const auto ext = default_extension(sys);
    for (double s : {-3.0, 0.0, 2.5}) {
        const Vec3 abc = abc_coefficients(sys, ext, {{0.3, -1.2, 2.0}, s});
        EXPECT_EQ(abc.x, 0.3);
        EXPECT_EQ(abc.y, -1.2);
        EXPECT_EQ(abc.z, 2.0);
    }
}

TEST(ExtendedVelocity, PlasmaExample) {
    const auto sys = plasma_particle();
    const auto v = extended_velocity(sys, default_extension(sys), {{1, 0, kPi / 2}, 0});
    EXPECT_NEAR(v.spatial.x, -kPi / 2, 1e-14);
    EXPECT_NEAR(v.spatial.y, -kPi / 2, 1e-14);
    EXPECT_NEAR(v.spatial.z, 1.0, 1e-14);
    EXPECT_NEAR(v.ds_dt, -0.5, 1e-15);
}

TEST(ExtendedVelocity, CriticalPointIsZero) {
    const auto sys = plasma_particle();
    const auto v = extended_velocity(sys, default_extension(sys), {{0, 0, 0}, 0.7});
    EXPECT_EQ(as4(v), (std::array<double, 4>{0, 0, 0, 0}));
}

TEST(ExtendedVelocity, RigidBodyDsDt) {
    const auto sys = rigid_body({1, 2, 3});
    const auto ext = default_extension(sys);
    for (double s : {-1.0, 0.0, 4.0}) EXPECT_NEAR(extended_velocity(sys, ext, {{1, 1, 1}, s}).ds_dt, -11.0 / 6, 1e-15);
}

TEST(ExtendedVelocity, SpatialPartUnchanged) {
    std::mt19937_64 rng(2);
    for (const auto& sys : {plasma_particle(), rigid_body({1, 2, 3}), nonintegrable_exb()}) {
        const auto ext = default_extension(sys);
        for (int i = 0; i < 50; ++i) {
            const ExtendedState st = random_state(rng, -2, 2, -0.4, 2);
            const Vec3 a = extended_velocity(sys, ext, st).spatial, b = velocity(sys, st.p);
            for (int k = 0; k < 3; ++k) EXPECT_EQ(a[k], b[k]);
        }
    }
}

TEST(ExtendedOperator, AntisymmetricAndReproducesVelocity) {
    std::mt19937_64 rng(3);
    for (const auto& sys : {plasma_particle(), rigid_body({1, 2, 3}), nonintegrable_exb()}) {
        const auto ext = default_extension(sys);
        for (int n = 0; n < 50; ++n) {
            const ExtendedState st = random_state(rng, -2, 2, -0.4, 2);
            const Mat4 m = extended_operator(sys, ext, st);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) EXPECT_EQ(m[i][j] + m[j][i], 0.0);
            const Vec3 gh = fd::gradient([&](const Point3& p) { return sys.H(p); }, st.p);
            const std::array<double, 4> g{gh.x, gh.y, gh.z, 0.0};
            const auto x = as4(extended_velocity(sys, ext, st));
            const Vec3 gh_exact = grad(sys.H, st.p);
            const std::array<double, 4> ge{gh_exact.x, gh_exact.y, gh_exact.z, 0.0};
            for (int i = 0; i < 4; ++i) {
                double mg = 0.0, mg_fd = 0.0;
                for (int j = 0; j < 4; ++j) {
                    mg += m[i][j] * ge[j];
                    mg_fd += m[i][j] * g[j];
                }
                EXPECT_NEAR(mg, x[i], 1e-12 * std::max(1.0, std::abs(x[i])));
                EXPECT_NEAR(mg_fd, x[i], 1e-7 * std::max(1.0, std::abs(x[i])));
            }
        }
    }
}

TEST(ConformalFactor, PlasmaIsOnePlusTwoS) {
    const auto sys = plasma_particle();
    const auto ext = default_extension(sys);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
        const ExtendedState st = random_state(rng, -3, 3, -0.45, 5);
        const auto r = conformal_factor(sys, ext, st);
        EXPECT_NEAR(r.signed_value, 1 + 2 * st.s, 1e-12);
        EXPECT_EQ(r.magnitude, std::abs(r.signed_value));
    }
}

TEST(ConformalFactor, DEqualsWAtZeroS) {
    const auto sys = plasma_particle();
    const auto ext = make_extension(sys.w, "w");
    EXPECT_NEAR(conformal_factor(sys, ext, {{0.4, 1.0, 2.2}, 0}).signed_value, 2.0, 1e-14);
}

TEST(ConformalFactor, ShearedFieldExample) {
    const auto sys = nonintegrable_exb();
    const auto ext = default_extension(sys, Box3{{0, 0, -1}, {2 * kPi, 2 * kPi, 1}});
    const double g = kPi / 4;
    const double h = 1.0 / std::pow(1 + g * g, 2);
    EXPECT_NEAR(h, 0.38253, 1e-5);
    for (double z : {-1.0, 0.0, 3.0}) EXPECT_NEAR(conformal_factor(sys, ext, {{0, kPi / 2, z}, 1}).signed_value, 1 + h, 1e-14);
}

TEST(ConformalFactor, VanishesBelowFloor) {
    const auto sys = plasma_particle();
    const auto ext = default_extension(sys);
    EXPECT_THROW(conformal_factor(sys, ext, {{0, 0, 0}, -0.5}), ConformalFactorVanished);
    EXPECT_NO_THROW(conformal_factor(sys, ext, {{0, 0, 0}, -0.6}));
    EXPECT_NEAR(conformal_factor(sys, ext, {{0, 0, 0}, -0.6}).signed_value, -0.2, 1e-15);
}

TEST(ConformalFactor, LinearInS) {
    std::mt19937_64 rng(5);
    for (const auto& sys : {plasma_particle(), rigid_body({1, 2, 3}), nonintegrable_exb()}) {
        const auto ext = default_extension(sys);
        for (int i = 0; i < 50; ++i) {
            const ExtendedState st = random_state(rng, -2, 2, -3, 3);
            const double r0 = conformal_factor_unchecked(sys, ext, {st.p, 0}).signed_value;
            const double rs = conformal_factor_unchecked(sys, ext, st).signed_value;
            EXPECT_NEAR(rs - r0, st.s * helicity_density(sys.w, st.p), 1e-13 * std::max(1.0, std::abs(rs)));
        }
    }
}

TEST(Divergence, BuiltinsAgainstOracle) {
    std::mt19937_64 rng(6);
    const auto exb_phi = nonintegrable_exb(expr::parse_field("sin(x)*cos(y) + z^2/2"));
    for (const auto& sys : {plasma_particle(), rigid_body({1, 2, 3}), exb_phi}) {
        const auto ext = default_extension(sys);
        for (int i = 0; i < 100; ++i) {
            const ExtendedState st = random_state(rng, -1, 1, 0, 1);
            EXPECT_LT(std::abs(extended_divergence(sys, ext, st)), 1e-6) << sys.name;
            EXPECT_LT(std::abs(oracle_divergence(sys, ext, st)), 1e-6) << sys.name;
        }
    }
}

TEST(Divergence, ConstantSystemExactlyZero) {
    const auto& sys = constant_system();
    const auto ext = make_extension(VectorField3::constant({0, 0, 1}), "const");
    EXPECT_EQ(extended_divergence(sys, ext, {{0.3, 0.1, -0.2}, 0.4}), 0.0);
}

TEST(JacobiDefect, ScaledOperatorSatisfiesJacobi) {
    const auto sys = plasma_particle();
    const auto ext = default_extension(sys);
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        const ExtendedState st = random_state(rng, -1, 1, 0, 1);
        EXPECT_LT(jacobi_defect_4d(sys, ext, st), 1e-6);
        EXPECT_LT(oracle_jacobi(sys, ext, st, true), 1e-6);
    }
}

TEST(JacobiDefect, UnscaledOperatorFails) {
    const auto sys = plasma_particle();
    const auto ext = default_extension(sys);
    std::mt19937_64 rng(8);
    double worst = 0.0, worst_oracle = 0.0;
    for (int i = 0; i < 100; ++i) {
        const ExtendedState st = random_state(rng, -1, 1, 0, 1);
        worst = std::max(worst, jacobi_defect_4d(sys, ext, st, OperatorScaling::Unscaled));
        worst_oracle = std::max(worst_oracle, oracle_jacobi(sys, ext, st, false));
    }
    EXPECT_GE(worst, 0.1);
    EXPECT_NEAR(worst, worst_oracle, 1e-6);
}

TEST(JacobiDefect, ConstantFieldsExactlyZero) {
    const auto& sys = constant_system();
    const auto ext = make_extension(VectorField3::constant({0.5, 0, 1}), "const");
    EXPECT_EQ(jacobi_defect_4d(sys, ext, {{1, 2, 3}, 0.5}, OperatorScaling::Unscaled), 0.0);
}

TEST(MakeExtension, ClosednessValidation) {
    EXPECT_THROW(make_extension(expr::parse_vector_field("x", "0", "0"), "x"), NotClosedError);
    const auto rep = make_extension(expr::parse_vector_field("x", "0", "0"), "x", Closedness::Report);
    EXPECT_NEAR(rep.closedness_residual, 1.0, 1e-12);
    EXPECT_FALSE(rep.closed());
    EXPECT_THROW(make_extension(VectorField3::constant({1, 0, 0}), "c", Closedness::Require, Box3::cube(1.0), 0.0),
                 ConfigError);
    EXPECT_TRUE(default_extension(plasma_particle()).closed());
}

TEST(MakeExtension, RigidBodyDefaultIsReportedNotClosed) {
    const auto ext = default_extension(rigid_body({1, 2, 3}));
    EXPECT_EQ(ext.d_name, "w");
    EXPECT_NEAR(ext.closedness_residual, 3.0, 1e-12);
    EXPECT_FALSE(ext.closed());
}

TEST(ParallelVelocity, Examples) {
    EXPECT_EQ(s_of_vparallel(0.0, 1.0), 0.0);
    EXPECT_NEAR(s_of_vparallel(std::log(2.0) / std::numbers::sqrt2, 1.0), 0.5, 1e-15);
    EXPECT_NEAR(s_of_vparallel(std::log(2.0) / std::numbers::sqrt2 / 4, 4.0), 0.5, 1e-15);
    EXPECT_THROW(s_of_vparallel(1.0, 0.0), ConfigError);
    EXPECT_THROW(vparallel_of_s(-0.5, 1.0), DomainError);
}

TEST(ParallelVelocity, RoundTrip) {
    for (double s : {-0.49, -0.1, 0.0, 0.5, 3.0, 100.0})
        for (double m : {0.1, 1.0, 7.0}) EXPECT_NEAR(s_of_vparallel(vparallel_of_s(s, m), m), s, 1e-12 * std::max(1.0, s));
}

TEST(ParallelVelocity, SmallMassTaylorExpansion) {
    // r = 1 + 2s = exp(sqrt2 m v); the linear truncation error is quadratic.
    const auto sys = plasma_particle();
    const auto ext = default_extension(sys);
    auto err = [&](double mv) {
        const double s = s_of_vparallel(mv, 1.0);
        const double r = conformal_factor(sys, ext, {{0.1, 0.2, 0.3}, s}).signed_value;
        return std::abs(r - (1 + std::numbers::sqrt2 * mv));
    };
    EXPECT_NEAR(err(1e-2) / err(5e-3), 4.0, 0.05);
    EXPECT_NEAR(err(1e-3) / err(5e-4), 4.0, 0.05);
    EXPECT_NEAR(err(1e-2) / err(1e-3), 100.0, 2.0);
}
