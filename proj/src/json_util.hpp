// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <refground/error.hpp>
#include <refground/geometry.hpp>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

namespace refground::detail
{

using nlohmann::json;

inline auto parseJson(std::string_view text, std::string_view what) -> json
{
    try
    {
        return json::parse(text);
    }
    catch (json::parse_error const& e)
    {
        throw ParseError(fmt::format("{}: {}", what, e.what()));
    }
}

inline auto field(json const& obj, char const* key, std::string_view path) -> json const&
{
    if (!obj.is_object())
        throw ParseError(fmt::format("{}: expected an object", path));
    auto it = obj.find(key);
    if (it == obj.end())
        throw ParseError(fmt::format("{}.{}: missing field", path, key));
    return *it;
}

inline auto asVec3(json const& value, std::string_view path) -> Vec3
{
    if (!value.is_array() || value.size() != 3)
        throw ParseError(fmt::format("{}: expected an array of 3 numbers", path));
    Vec3 v;
    for (int i = 0; i < 3; ++i)
    {
        if (!value[i].is_number())
            throw ParseError(fmt::format("{}[{}]: expected a number", path, i));
        v[i] = value[i].get<double>();
    }
    return v;
}

inline auto asRgb(json const& value, std::string_view path) -> Rgb
{
    if (!value.is_array() || value.size() != 3)
        throw ParseError(fmt::format("{}: expected an array of 3 integers", path));
    Rgb rgb {};
    for (int i = 0; i < 3; ++i)
    {
        if (!value[i].is_number_integer())
            throw ParseError(fmt::format("{}[{}]: expected an integer", path, i));
        rgb[i] = value[i].get<int>();
    }
    return rgb;
}

inline auto asString(json const& value, std::string_view path) -> std::string
{
    if (!value.is_string())
        throw ParseError(fmt::format("{}: expected a string", path));
    return value.get<std::string>();
}

inline auto asInt(json const& value, std::string_view path) -> int
{
    if (!value.is_number_integer())
        throw ParseError(fmt::format("{}: expected an integer", path));
    return value.get<int>();
}

inline auto toJson(Vec3 const& v) -> json
{
    return json::array({ v.x, v.y, v.z });
}

inline auto toJson(Aabb const& box) -> json
{
    return json { { "center", toJson(box.center) }, { "size", toJson(box.size) } };
}

inline auto asAabb(json const& value, std::string_view path) -> Aabb
{
    return { asVec3(field(value, "center", path), fmt::format("{}.center", path)),
             asVec3(field(value, "size", path), fmt::format("{}.size", path)) };
}

} // namespace refground::detail
