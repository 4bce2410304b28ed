#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "errors.hpp"
#include "vec3.hpp"

namespace poissonize {

/// Axis-aligned box [lo, hi] in R^3.
struct Box3 {
    Vec3 lo{-1.0, -1.0, -1.0};
    Vec3 hi{1.0, 1.0, 1.0};

    static Box3 cube(double half) { return {{-half, -half, -half}, {half, half, half}}; }

    Point3 at(const std::array<double, 3>& unit) const {
        return {lo.x + unit[0] * (hi.x - lo.x), lo.y + unit[1] * (hi.y - lo.y),
                lo.z + unit[2] * (hi.z - lo.z)};
    }
};

/// Radical inverse of `index` in `base` (van der Corput sequence).
inline double radical_inverse(std::size_t index, unsigned base) {
    double inv_base = 1.0 / base, factor = inv_base, result = 0.0;
    while (index > 0) {
        result += static_cast<double>(index % base) * factor;
        index /= base;
        factor *= inv_base;
    }
    return result;
}

/// First `count` points of the 3D Halton sequence (bases 2, 3, 5) mapped into `box`.
/// Index 0 is skipped so the corner lo is not sampled twice by nested calls.
inline std::vector<Point3> halton_points(const Box3& box, std::size_t count) {
    if (count == 0) throw ConfigError("sample count must be positive");
    std::vector<Point3> pts;
    pts.reserve(count);
    for (std::size_t i = 1; i <= count; ++i)
        pts.push_back(box.at({radical_inverse(i, 2), radical_inverse(i, 3), radical_inverse(i, 5)}));
    return pts;
}

}  // namespace poissonize
