// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <refground/vec3.hpp>

#include <array>
#include <cstdint>
#include <span>

namespace refground
{

/// Axis-aligned box given by center and full extents (meters, +z up).
struct Aabb
{
    Vec3 center;
    Vec3 size;

    [[nodiscard]] auto min() const -> Vec3 { return center - size / 2.0; }
    [[nodiscard]] auto max() const -> Vec3 { return center + size / 2.0; }
    [[nodiscard]] auto volume() const -> double { return size.x * size.y * size.z; }

    friend auto operator==(Aabb const&, Aabb const&) -> bool = default;
};

/// Throws SchemaError unless every extent is strictly positive and finite.
void validateAabb(Aabb const& box);

using Rgb = std::array<int, 3>;

struct Hsl
{
    double h = 0.0; ///< degrees in [0, 360)
    double s = 0.0; ///< [0, 1]
    double l = 0.0; ///< [0, 1]
};

struct Plane
{
    Vec3 point;
    Vec3 normal; ///< unit length
};

enum class Side
{
    Left,
    Right,
    Aligned,
};

auto toString(Side side) -> char const*;

/// Weights of the HSL color distance. Hue difference is folded to [0, 180] and divided by 180.
struct ColorWeights
{
    double hue = 1.0;
    double saturation = 0.5;
    double lightness = 0.5;
};

/// Intersection volume over union volume. Zero for disjoint boxes.
auto iou3d(Aabb const& a, Aabb const& b) -> double;

/// Throws DomainError for components outside [0, 255].
auto rgbToHsl(Rgb const& rgb) -> Hsl;
auto hslToRgb(Hsl const& hsl) -> Rgb;

auto colorDistance(Hsl const& a, Hsl const& b, ColorWeights const& weights = {}) -> double;

/// |dot(p - plane.point, plane.normal)|. Throws DomainError if the normal is not unit length within 1e-6.
auto pointPlaneDistance(Vec3 const& p, Plane const& plane) -> double;

/// Which side of the observer->anchor sight line the candidate lies on, judged in the horizontal plane.
///
/// The verdict is the sign of the z component of cross(anchor - observer, candidate - observer):
/// positive is left, negative is right. Throws DomainError when anchor and observer coincide
/// horizontally.
auto leftRightOf(Vec3 const& anchor, Vec3 const& candidate, Vec3 const& observer) -> Side;

/// Default viewpoint for view-dependent relations: the scene center raised to standing eye height.
auto defaultObserver(Vec3 const& sceneCenter) -> Vec3;

inline constexpr double kObserverHeight = 1.6;

/// Score in [0, 1] for "x lies between a and b".
///
/// With t the projection parameter of x onto segment ab and `offset` the perpendicular distance,
/// both measured in units of |ab|:
///
///     outside = max(0, -t, t - 1)
///     lateral = max(0, offset - kBetweenSlack)
///     score   = 1 / (1 + (outside / kBetweenScale)^2 + (lateral / kBetweenScale)^2)
///
/// Throws DomainError when a == b.
auto betweenness(Vec3 const& a, Vec3 const& b, Vec3 const& x) -> double;

inline constexpr double kBetweenSlack = 0.1;
inline constexpr double kBetweenScale = 0.25;

/// Distance from `point` to the largest face of `wall` that faces the point.
///
/// The face normal is the axis of the wall's smallest extent; of the two faces on that axis the
/// one nearer to the point is used.
auto wallFaceDistance(Vec3 const& point, Aabb const& wall) -> double;

/// Sum of the two smallest center-to-wall-face distances; lower means deeper in a corner.
/// Throws DomainError with fewer than two walls.
auto cornerScore(Aabb const& object, std::span<Aabb const> walls) -> double;

} // namespace refground
