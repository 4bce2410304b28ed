#pragma once

#include <functional>
#include <string>
#include <utility>

#include "vec3.hpp"

namespace poissonize {

/// Scalar field on R^3 carrying its exact gradient.
///
/// Instances are immutable after construction and cheap to copy; the
/// callables are shared between copies.
class ScalarField3 {
public:
    using EvalFn = std::function<double(const Point3&)>;
    using GradFn = std::function<Vec3(const Point3&)>;

    ScalarField3() : ScalarField3(constant(0.0)) {}

    ScalarField3(EvalFn eval, GradFn gradient, std::string label = {})
        : eval_(std::move(eval)), gradient_(std::move(gradient)), label_(std::move(label)) {}

    static ScalarField3 constant(double c) {
        return {[c](const Point3&) { return c; }, [](const Point3&) { return Vec3{}; },
                std::to_string(c)};
    }

    double operator()(const Point3& p) const { return eval_(p); }
    Vec3 gradient(const Point3& p) const { return gradient_(p); }
    const std::string& label() const noexcept { return label_; }

private:
    EvalFn eval_;
    GradFn gradient_;
    std::string label_;
};

/// Vector field on R^3 carrying its exact Jacobian (jacobian[i][j] = d v_i / d x_j).
class VectorField3 {
public:
    using EvalFn = std::function<Vec3(const Point3&)>;
    using JacFn = std::function<Mat3(const Point3&)>;

    VectorField3() : VectorField3(constant({})) {}

    VectorField3(EvalFn eval, JacFn jacobian, std::string label = {})
        : eval_(std::move(eval)), jacobian_(std::move(jacobian)), label_(std::move(label)) {}

    static VectorField3 constant(const Vec3& c) {
        return {[c](const Point3&) { return c; }, [](const Point3&) { return Mat3{}; },
                "constant"};
    }

    /// Assembles a vector field from three scalar components.
    static VectorField3 from_components(ScalarField3 fx, ScalarField3 fy, ScalarField3 fz,
                                        std::string label = {}) {
        auto eval = [fx, fy, fz](const Point3& p) { return Vec3{fx(p), fy(p), fz(p)}; };
        auto jac = [fx, fy, fz](const Point3& p) {
            const Vec3 gx = fx.gradient(p), gy = fy.gradient(p), gz = fz.gradient(p);
            return Mat3{{{gx.x, gx.y, gx.z}, {gy.x, gy.y, gy.z}, {gz.x, gz.y, gz.z}}};
        };
        return {std::move(eval), std::move(jac), std::move(label)};
    }

    Vec3 operator()(const Point3& p) const { return eval_(p); }
    Mat3 jacobian(const Point3& p) const { return jacobian_(p); }
    const std::string& label() const noexcept { return label_; }

private:
    EvalFn eval_;
    JacFn jacobian_;
    std::string label_;
};

inline Vec3 grad(const ScalarField3& f, const Point3& p) {
    return require_finite(f.gradient(p), "gradient");
}

inline Vec3 curl_from_jacobian(const Mat3& j) {
    return {j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]};
}

inline Vec3 curl(const VectorField3& w, const Point3& p) {
    const Mat3 j = require_finite(w.jacobian(p), "jacobian");
    return curl_from_jacobian(j);
}

inline double div(const VectorField3& v, const Point3& p) {
    const Mat3 j = require_finite(v.jacobian(p), "jacobian");
    return j[0][0] + j[1][1] + j[2][2];
}

/// h = w . curl w; vanishes exactly where the Jacobi identity holds.
inline double helicity_density(const VectorField3& w, const Point3& p) {
    const Vec3 wp = require_finite(w(p), "vector field");
    return require_finite(dot(wp, curl(w, p)), "helicity density");
}

}  // namespace poissonize
