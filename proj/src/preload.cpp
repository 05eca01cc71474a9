// SPDX-License-Identifier: Apache-2.0
#include "json_util.hpp"

#include <refground/geometry.hpp>
#include <refground/sandbox.hpp>

#include <fmt/format.h>

namespace refground
{

namespace
{
    // Mirrors geometry.cpp operation for operation. Pure Python, no imports.
    constexpr std::string_view kHelpers = R"PY(
def iou3d(center_a, size_a, center_b, size_b):
    inter = 1.0
    for k in range(3):
        lo = max(center_a[k] - size_a[k] / 2.0, center_b[k] - size_b[k] / 2.0)
        hi = min(center_a[k] + size_a[k] / 2.0, center_b[k] + size_b[k] / 2.0)
        inter = inter * max(0.0, hi - lo)
    if inter <= 0.0:
        return 0.0
    def volume(c, s):
        v = 1.0
        for k in range(3):
            v = v * ((c[k] + s[k] / 2.0) - (c[k] - s[k] / 2.0))
        return v
    union = volume(center_a, size_a) + volume(center_b, size_b) - inter
    return min(1.0, max(0.0, inter / union))

def rgb_to_hsl(rgb):
    for c in rgb:
        if c < 0 or c > 255:
            raise ValueError("rgb component %r outside [0, 255]" % (c,))
    r, g, b = rgb[0] / 255.0, rgb[1] / 255.0, rgb[2] / 255.0
    hi, lo = max(r, g, b), min(r, g, b)
    l = (hi + lo) / 2.0
    d = hi - lo
    if d == 0.0:
        return (0.0, 0.0, l)
    s = d / (hi + lo) if l <= 0.5 else d / (2.0 - hi - lo)
    if hi == r:
        h = (g - b) / d
    elif hi == g:
        h = (b - r) / d + 2.0
    else:
        h = (r - g) / d + 4.0
    h = h * 60.0
    if h < 0.0:
        h += 360.0
    if h >= 360.0:
        h -= 360.0
    return (h, s, l)

def color_distance(hsl_a, hsl_b, w_hue=%HUE%, w_sat=%SAT%, w_light=%LIGHT%):
    dh = abs(hsl_a[0] - hsl_b[0]) %% 360.0
    if dh > 180.0:
        dh = 360.0 - dh
    return w_hue * (dh / 180.0) + w_sat * abs(hsl_a[1] - hsl_b[1]) + w_light * abs(hsl_a[2] - hsl_b[2])

def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]

def _sub(a, b):
    return [a[0] - b[0], a[1] - b[1], a[2] - b[2]]

def distance(p, q):
    d = _sub(p, q)
    return _dot(d, d) ** 0.5

def point_plane_distance(p, plane_point, normal):
    if abs(_dot(normal, normal) ** 0.5 - 1.0) > 1e-6:
        raise ValueError("plane normal must be unit length")
    return abs(_dot(_sub(p, plane_point), normal))

def left_right_of(anchor, candidate, observer):
    sx, sy = anchor[0] - observer[0], anchor[1] - observer[1]
    if (sx * sx + sy * sy) ** 0.5 < 1e-12:
        raise ValueError("degenerate view: anchor coincides with observer")
    cx, cy = candidate[0] - observer[0], candidate[1] - observer[1]
    z = sx * cy - sy * cx
    if abs(z) < 1e-9:
        return "aligned"
    return "left" if z > 0.0 else "right"

def default_observer(scene_center):
    return [scene_center[0], scene_center[1], %OBSERVER%]

def betweenness(a, b, x):
    ab = _sub(b, a)
    len2 = _dot(ab, ab)
    if len2 < 1e-12:
        raise ValueError("betweenness needs two distinct endpoints")
    t = _dot(_sub(x, a), ab) / len2
    foot = [a[0] + ab[0] * t, a[1] + ab[1] * t, a[2] + ab[2] * t]
    offset = distance(x, foot) / len2 ** 0.5
    outside = max(0.0, -t, t - 1.0)
    lateral = max(0.0, offset - %SLACK%)
    u = outside / %SCALE%
    v = lateral / %SCALE%
    return 1.0 / (1.0 + u * u + v * v)

def wall_face_distance(point, wall_center, wall_size):
    axis = 0
    for k in (1, 2):
        if wall_size[k] < wall_size[axis]:
            axis = k
    half = wall_size[axis] / 2.0
    face = wall_center[axis] + half if point[axis] >= wall_center[axis] else wall_center[axis] - half
    return abs(point[axis] - face)

def corner_score(center, size, walls):
    if len(walls) < 2:
        raise ValueError("corner score needs at least 2 walls")
    d = sorted(wall_face_distance(center, w[0], w[1]) for w in walls)
    return d[0] + d[1]

def get_object(object_id):
    if object_id not in OBJECTS:
        raise KeyError("object %%d is not among the relevant objects" %% object_id)
    return OBJECTS[object_id]

def objects_of(category):
    return [o for o in OBJECTS.values() if o["category"] == category]
)PY";

    void replaceAll(std::string& s, std::string_view from, std::string_view to)
    {
        for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
            s.replace(pos, from.size(), to);
    }

    auto buildHelpers() -> std::string
    {
        std::string src(kHelpers);
        ColorWeights const w;
        replaceAll(src, "%HUE%", fmt::format("{:.17g}", w.hue));
        replaceAll(src, "%SAT%", fmt::format("{:.17g}", w.saturation));
        replaceAll(src, "%LIGHT%", fmt::format("{:.17g}", w.lightness));
        replaceAll(src, "%OBSERVER%", fmt::format("{:.17g}", kObserverHeight));
        replaceAll(src, "%SLACK%", fmt::format("{:.17g}", kBetweenSlack));
        replaceAll(src, "%SCALE%", fmt::format("{:.17g}", kBetweenScale));
        replaceAll(src, "%%", "%");
        return src;
    }

    auto pyList(Vec3 const& v) -> std::string
    {
        return fmt::format("[{:.2f}, {:.2f}, {:.2f}]", roundMeters(v.x), roundMeters(v.y), roundMeters(v.z));
    }
} // namespace

auto helperSource() -> std::string_view
{
    static std::string const source = buildHelpers();
    return source;
}

auto preloadSource(SceneTranscript const& scene, IdSet const& keptIds) -> std::string
{
    std::string src = fmt::format("SCENE_ID = {}\nSCENE_CENTER = {}\nOBJECTS = {{\n",
                                  detail::json(scene.sceneId).dump(), pyList(scene.sceneCenter));
    for (auto const& obj: scene.objects)
    {
        if (!keptIds.contains(obj.id))
            continue;
        src += fmt::format("    {}: {{\"id\": {}, \"category\": {}, \"center\": {}, \"size\": {}, \"rgb\": [{}, {}, {}]}},\n",
                           obj.id, obj.id, detail::json(obj.category).dump(), pyList(obj.center), pyList(obj.size),
                           obj.rgb[0], obj.rgb[1], obj.rgb[2]);
    }
    src += "}\n";
    src += helperSource();
    return src;
}

} // namespace refground
