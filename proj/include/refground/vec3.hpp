// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

namespace refground
{

struct Vec3
{
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr auto operator[](int axis) const -> double { return axis == 0 ? x : (axis == 1 ? y : z); }
    constexpr auto operator[](int axis) -> double& { return axis == 0 ? x : (axis == 1 ? y : z); }

    friend constexpr auto operator+(Vec3 a, Vec3 b) -> Vec3 { return { a.x + b.x, a.y + b.y, a.z + b.z }; }
    friend constexpr auto operator-(Vec3 a, Vec3 b) -> Vec3 { return { a.x - b.x, a.y - b.y, a.z - b.z }; }
    friend constexpr auto operator*(Vec3 a, double s) -> Vec3 { return { a.x * s, a.y * s, a.z * s }; }
    friend constexpr auto operator*(double s, Vec3 a) -> Vec3 { return a * s; }
    friend constexpr auto operator/(Vec3 a, double s) -> Vec3 { return { a.x / s, a.y / s, a.z / s }; }
    friend constexpr auto operator==(Vec3 const&, Vec3 const&) -> bool = default;
};

constexpr auto dot(Vec3 a, Vec3 b) -> double
{
    return a.x * b.x + a.y * b.y + a.z * b.z;
}

constexpr auto cross(Vec3 a, Vec3 b) -> Vec3
{
    return { a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x };
}

inline auto norm(Vec3 a) -> double
{
    return std::sqrt(dot(a, a));
}

} // namespace refground
