#pragma once

#include <array>
#include <cmath>
#include <string>

#include "errors.hpp"

namespace poissonize {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double a) { x *= a; y *= a; z *= a; return *this; }

    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

/// Points and vectors share one representation; the alias documents intent.
using Point3 = Vec3;

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline bool is_finite(const Vec3& a) {
    return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

/// Row-major 3x3 matrix; for a Jacobian, m[i][j] = d(component i)/d(coordinate j).
using Mat3 = std::array<std::array<double, 3>, 3>;

inline bool is_finite(const Mat3& m) {
    for (const auto& row : m)
        for (double v : row)
            if (!std::isfinite(v)) return false;
    return true;
}

inline double require_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw NonFiniteResult(std::string(what) + " is not finite");
    return v;
}

inline const Vec3& require_finite(const Vec3& v, const char* what) {
    if (!is_finite(v)) throw NonFiniteResult(std::string(what) + " is not finite");
    return v;
}

inline const Mat3& require_finite(const Mat3& m, const char* what) {
    if (!is_finite(m)) throw NonFiniteResult(std::string(what) + " is not finite");
    return m;
}

}  // namespace poissonize
