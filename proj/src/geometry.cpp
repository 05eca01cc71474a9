// SPDX-License-Identifier: Apache-2.0
#include <refground/error.hpp>
#include <refground/geometry.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace refground
{

namespace
{
    constexpr double kNormalTolerance = 1e-6;
    constexpr double kSideTolerance = 1e-9;
    constexpr double kDegenerate = 1e-12;

    // Extents are taken from the same rounded endpoints for intersection and union, so a box
    // compared with itself yields exactly 1.
    auto overlap(double c1, double s1, double c2, double s2) -> double
    {
        auto const lo = std::max(c1 - s1 / 2.0, c2 - s2 / 2.0);
        auto const hi = std::min(c1 + s1 / 2.0, c2 + s2 / 2.0);
        return std::max(0.0, hi - lo);
    }

    auto endpointVolume(Aabb const& box) -> double
    {
        auto extent = [](double c, double s) { return (c + s / 2.0) - (c - s / 2.0); };
        return extent(box.center.x, box.size.x) * extent(box.center.y, box.size.y) * extent(box.center.z, box.size.z);
    }
} // namespace

void validateAabb(Aabb const& box)
{
    for (int axis = 0; axis < 3; ++axis)
    {
        if (!std::isfinite(box.center[axis]))
            throw SchemaError(fmt::format("box center component {} is not finite", axis));
        if (!(box.size[axis] > 0.0) || !std::isfinite(box.size[axis]))
            throw SchemaError(fmt::format("box size component {} must be positive, got {}", axis, box.size[axis]));
    }
}

auto toString(Side side) -> char const*
{
    switch (side)
    {
        case Side::Left: return "left";
        case Side::Right: return "right";
        case Side::Aligned: return "aligned";
    }
    return "aligned";
}

auto iou3d(Aabb const& a, Aabb const& b) -> double
{
    auto const inter = overlap(a.center.x, a.size.x, b.center.x, b.size.x)
                       * overlap(a.center.y, a.size.y, b.center.y, b.size.y)
                       * overlap(a.center.z, a.size.z, b.center.z, b.size.z);
    if (inter <= 0.0)
        return 0.0;
    auto const uni = endpointVolume(a) + endpointVolume(b) - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

auto rgbToHsl(Rgb const& rgb) -> Hsl
{
    for (auto c: rgb)
        if (c < 0 || c > 255)
            throw DomainError(fmt::format("rgb component {} outside [0, 255]", c));

    auto const r = rgb[0] / 255.0;
    auto const g = rgb[1] / 255.0;
    auto const b = rgb[2] / 255.0;
    auto const hi = std::max({ r, g, b });
    auto const lo = std::min({ r, g, b });
    auto const l = (hi + lo) / 2.0;
    auto const d = hi - lo;

    if (d == 0.0)
        return { 0.0, 0.0, l };

    auto const s = l <= 0.5 ? d / (hi + lo) : d / (2.0 - hi - lo);
    double h = 0.0;
    if (hi == r)
        h = std::fmod((g - b) / d, 6.0);
    else if (hi == g)
        h = (b - r) / d + 2.0;
    else
        h = (r - g) / d + 4.0;
    h *= 60.0;
    if (h < 0.0)
        h += 360.0;
    if (h >= 360.0)
        h -= 360.0;
    return { h, s, l };
}

auto hslToRgb(Hsl const& hsl) -> Rgb
{
    auto const c = (1.0 - std::abs(2.0 * hsl.l - 1.0)) * hsl.s;
    auto const hp = std::fmod(hsl.h, 360.0) / 60.0;
    auto const x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1)
        r = c, g = x;
    else if (hp < 2)
        r = x, g = c;
    else if (hp < 3)
        g = c, b = x;
    else if (hp < 4)
        g = x, b = c;
    else if (hp < 5)
        r = x, b = c;
    else
        r = c, b = x;
    auto const m = hsl.l - c / 2.0;
    auto const to8 = [m](double v) { return std::clamp(static_cast<int>(std::lround((v + m) * 255.0)), 0, 255); };
    return { to8(r), to8(g), to8(b) };
}

auto colorDistance(Hsl const& a, Hsl const& b, ColorWeights const& weights) -> double
{
    auto dh = std::fmod(std::abs(a.h - b.h), 360.0);
    if (dh > 180.0)
        dh = 360.0 - dh;
    return weights.hue * (dh / 180.0) + weights.saturation * std::abs(a.s - b.s)
           + weights.lightness * std::abs(a.l - b.l);
}

auto pointPlaneDistance(Vec3 const& p, Plane const& plane) -> double
{
    if (std::abs(norm(plane.normal) - 1.0) > kNormalTolerance)
        throw DomainError(fmt::format("plane normal must be unit length, got |n| = {}", norm(plane.normal)));
    return std::abs(dot(p - plane.point, plane.normal));
}

auto leftRightOf(Vec3 const& anchor, Vec3 const& candidate, Vec3 const& observer) -> Side
{
    auto const sight = Vec3 { anchor.x - observer.x, anchor.y - observer.y, 0.0 };
    if (norm(sight) < kDegenerate)
        throw DomainError("degenerate view: anchor coincides with observer in the horizontal plane");
    auto const toCandidate = Vec3 { candidate.x - observer.x, candidate.y - observer.y, 0.0 };
    auto const z = cross(sight, toCandidate).z;
    if (std::abs(z) < kSideTolerance)
        return Side::Aligned;
    return z > 0.0 ? Side::Left : Side::Right;
}

auto defaultObserver(Vec3 const& sceneCenter) -> Vec3
{
    return { sceneCenter.x, sceneCenter.y, kObserverHeight };
}

auto betweenness(Vec3 const& a, Vec3 const& b, Vec3 const& x) -> double
{
    auto const ab = b - a;
    auto const len2 = dot(ab, ab);
    if (len2 < kDegenerate)
        throw DomainError("betweenness needs two distinct endpoints");
    auto const t = dot(x - a, ab) / len2;
    auto const offset = norm(x - (a + ab * t)) / std::sqrt(len2);
    auto const outside = std::max({ 0.0, -t, t - 1.0 });
    auto const lateral = std::max(0.0, offset - kBetweenSlack);
    auto const u = outside / kBetweenScale;
    auto const v = lateral / kBetweenScale;
    return 1.0 / (1.0 + u * u + v * v);
}

auto wallFaceDistance(Vec3 const& point, Aabb const& wall) -> double
{
    int axis = 0;
    for (int k = 1; k < 3; ++k)
        if (wall.size[k] < wall.size[axis])
            axis = k;
    auto const half = wall.size[axis] / 2.0;
    auto const nearFace = point[axis] >= wall.center[axis] ? wall.center[axis] + half : wall.center[axis] - half;
    return std::abs(point[axis] - nearFace);
}

auto cornerScore(Aabb const& object, std::span<Aabb const> walls) -> double
{
    if (walls.size() < 2)
        throw DomainError(fmt::format("corner score needs at least 2 walls, got {}", walls.size()));
    std::vector<double> distances;
    distances.reserve(walls.size());
    for (auto const& wall: walls)
        distances.push_back(wallFaceDistance(object.center, wall));
    std::partial_sort(distances.begin(), distances.begin() + 2, distances.end());
    return distances[0] + distances[1];
}

} // namespace refground
