// SPDX-License-Identifier: Apache-2.0
#include "json_util.hpp"

#include <refground/error.hpp>
#include <refground/scene.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

namespace refground
{

using detail::json;

auto SceneTranscript::find(ObjectId id) const -> ObjectRecord const*
{
    auto it = std::ranges::find(objects, id, &ObjectRecord::id);
    return it == objects.end() ? nullptr : &*it;
}

auto SceneTranscript::ids() const -> IdSet
{
    IdSet out;
    for (auto const& obj: objects)
        out.insert(obj.id);
    return out;
}

auto roundMeters(double value) -> double
{
    auto const r = std::round(value * 100.0) / 100.0;
    return r == 0.0 ? 0.0 : r;
}

auto readFile(std::filesystem::path const& path) -> std::string
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(fmt::format("cannot open {}", path.string()));
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void validateScene(SceneTranscript const& scene, bool requireObjects)
{
    if (requireObjects && scene.objects.empty())
        throw SchemaError(fmt::format("scene {} has no objects", scene.sceneId));
    IdSet seen;
    for (auto const& obj: scene.objects)
    {
        if (obj.id < 0)
            throw SchemaError(fmt::format("negative id {}", obj.id));
        if (!seen.insert(obj.id).second)
            throw SchemaError(fmt::format("duplicate id {}", obj.id));
        if (obj.category.empty() || obj.category.find_first_of(",;\n\r") != std::string::npos)
            throw SchemaError(fmt::format("object {}: invalid category '{}'", obj.id, obj.category));
        for (int axis = 0; axis < 3; ++axis)
        {
            if (!(obj.size[axis] > 0.0))
                throw SchemaError(fmt::format("object {}: size component {} must be positive", obj.id, axis));
            if (obj.rgb[axis] < 0 || obj.rgb[axis] > 255)
                throw SchemaError(fmt::format("object {}: rgb component {} outside [0, 255]", obj.id, axis));
        }
    }
}

auto parseDetections(std::string_view text) -> SceneTranscript
{
    auto const doc = detail::parseJson(text, "detections");
    SceneTranscript scene;
    scene.sceneId = detail::asString(detail::field(doc, "scene_id", "$"), "$.scene_id");

    auto const& objects = detail::field(doc, "objects", "$");
    if (!objects.is_array())
        throw ParseError("$.objects: expected an array");
    for (std::size_t i = 0; i < objects.size(); ++i)
    {
        auto const path = fmt::format("$.objects[{}]", i);
        auto const& o = objects[i];
        ObjectRecord rec;
        rec.id = detail::asInt(detail::field(o, "id", path), path + ".id");
        rec.category = detail::asString(detail::field(o, "category", path), path + ".category");
        std::ranges::transform(rec.category, rec.category.begin(),
                               [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        rec.center = detail::asVec3(detail::field(o, "center", path), path + ".center");
        rec.size = detail::asVec3(detail::field(o, "size", path), path + ".size");
        rec.rgb = detail::asRgb(detail::field(o, "rgb", path), path + ".rgb");
        scene.objects.push_back(std::move(rec));
    }
    validateScene(scene);

    if (auto it = doc.find("scene_center"); it != doc.end() && !it->is_null())
    {
        scene.sceneCenter = detail::asVec3(*it, "$.scene_center");
    }
    else
    {
        Vec3 sum;
        for (auto const& obj: scene.objects)
            sum = sum + obj.center;
        scene.sceneCenter = sum / static_cast<double>(scene.objects.size());
    }
    return scene;
}

auto loadDetections(std::filesystem::path const& path) -> SceneTranscript
{
    auto const text = readFile(path);
    try
    {
        return parseDetections(text);
    }
    catch (ParseError const& e)
    {
        throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

auto detectionsToJson(SceneTranscript const& scene) -> std::string
{
    auto objects = json::array();
    for (auto const& obj: scene.objects)
    {
        objects.push_back(json { { "id", obj.id },
                                 { "category", obj.category },
                                 { "center", detail::toJson(obj.center) },
                                 { "size", detail::toJson(obj.size) },
                                 { "rgb", obj.rgb } });
    }
    json doc { { "scene_id", scene.sceneId },
               { "scene_center", detail::toJson(scene.sceneCenter) },
               { "objects", std::move(objects) } };
    return doc.dump(2);
}

namespace
{
    auto fmtMeters(Vec3 const& v) -> std::string
    {
        return fmt::format("[{:.2f},{:.2f},{:.2f}]", roundMeters(v.x), roundMeters(v.y), roundMeters(v.z));
    }

    void renderObject(std::string& out, ObjectRecord const& obj)
    {
        out += fmt::format("{}, id={}, ctr={}, size={}, rgb=[{},{},{}];\n", obj.category, obj.id, fmtMeters(obj.center),
                           fmtMeters(obj.size), obj.rgb[0], obj.rgb[1], obj.rgb[2]);
    }

    // clang-format off
    #define RG_NUM R"(\s*(-?\d+(?:\.\d+)?)\s*)"
    #define RG_INT R"(\s*(\d+)\s*)"
    std::regex const kHeader { R"(^(.+?): Scene center: \[)" RG_NUM "," RG_NUM "," RG_NUM R"(\]\. objs list:\s*$)" };
    std::regex const kObject { R"(^(.+?), id=(\d+), ctr=\[)" RG_NUM "," RG_NUM "," RG_NUM
                               R"(\], size=\[)" RG_NUM "," RG_NUM "," RG_NUM
                               R"(\], rgb=\[)" RG_INT "," RG_INT "," RG_INT R"(\];\s*$)" };
    #undef RG_NUM
    #undef RG_INT
    // clang-format on

    auto isElision(std::string_view line) -> bool
    {
        auto const first = line.find_first_not_of(" \t\r");
        if (first == std::string_view::npos)
            return true;
        auto const last = line.find_last_not_of(" \t\r");
        return line.substr(first, last - first + 1) == "...";
    }
} // namespace

auto renderTranscript(SceneTranscript const& scene, std::optional<IdSet> const& ids) -> std::string
{
    if (ids)
    {
        for (auto id: *ids)
            if (!scene.find(id))
                throw DomainError(fmt::format("unknown object id {} in scene {}", id, scene.sceneId));
    }
    auto out = fmt::format("{}: Scene center: {}. objs list:\n", scene.sceneId, fmtMeters(scene.sceneCenter));
    for (auto const& obj: scene.objects)
        if (!ids || ids->contains(obj.id))
            renderObject(out, obj);
    return out;
}

auto parseTranscript(std::string_view text) -> SceneTranscript
{
    SceneTranscript scene;
    bool haveHeader = false;
    std::size_t lineNo = 0;
    std::istringstream in { std::string(text) };
    std::string line;
    std::smatch m;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (isElision(line))
            continue;
        if (!haveHeader)
        {
            if (!std::regex_match(line, m, kHeader))
                throw ParseError(fmt::format("line {}: expected scene header, got '{}'", lineNo, line));
            scene.sceneId = m[1];
            scene.sceneCenter = { std::stod(m[2]), std::stod(m[3]), std::stod(m[4]) };
            haveHeader = true;
            continue;
        }
        if (!std::regex_match(line, m, kObject))
            throw ParseError(fmt::format("line {}: malformed object line '{}'", lineNo, line));
        ObjectRecord rec;
        rec.category = m[1];
        rec.id = std::stoi(m[2]);
        rec.center = { std::stod(m[3]), std::stod(m[4]), std::stod(m[5]) };
        rec.size = { std::stod(m[6]), std::stod(m[7]), std::stod(m[8]) };
        rec.rgb = { std::stoi(m[9]), std::stoi(m[10]), std::stoi(m[11]) };
        scene.objects.push_back(std::move(rec));
    }
    if (!haveHeader)
        throw ParseError("line 1: transcript is empty");
    try
    {
        validateScene(scene, false);
    }
    catch (SchemaError const& e)
    {
        throw ParseError(fmt::format("transcript: {}", e.what()));
    }
    return scene;
}

auto restrictScene(SceneTranscript const& scene, IdSet const& ids) -> SceneTranscript
{
    SceneTranscript out { scene.sceneId, scene.sceneCenter, {} };
    for (auto const& obj: scene.objects)
        if (ids.contains(obj.id))
            out.objects.push_back(obj);
    return out;
}

auto taskFromJson(std::string_view line) -> GroundingTask
{
    auto const doc = detail::parseJson(line, "task");
    GroundingTask task;
    task.taskId = detail::asString(detail::field(doc, "task_id", "$"), "$.task_id");
    task.sceneId = detail::asString(detail::field(doc, "scene_id", "$"), "$.scene_id");
    task.utterance = detail::asString(detail::field(doc, "utterance", "$"), "$.utterance");
    auto present = [&](char const* key) { return doc.contains(key) && !doc[key].is_null(); };
    if (present("gt_object_id"))
        task.gtObjectId = detail::asInt(doc["gt_object_id"], "$.gt_object_id");
    if (present("gt_bbox"))
        task.gtBox = detail::asAabb(doc["gt_bbox"], "$.gt_bbox");
    if (present("distractor_count"))
    {
        task.distractorCount = detail::asInt(doc["distractor_count"], "$.distractor_count");
        if (*task.distractorCount < 0)
            throw SchemaError(fmt::format("task {}: negative distractor_count", task.taskId));
    }
    if (present("view_dependent"))
    {
        if (!doc["view_dependent"].is_boolean())
            throw ParseError("$.view_dependent: expected a boolean");
        task.viewDependent = doc["view_dependent"].get<bool>();
    }
    return task;
}

auto taskToJson(GroundingTask const& task) -> std::string
{
    nlohmann::ordered_json doc;
    doc["task_id"] = task.taskId;
    doc["scene_id"] = task.sceneId;
    doc["utterance"] = task.utterance;
    if (task.gtObjectId)
        doc["gt_object_id"] = *task.gtObjectId;
    if (task.gtBox)
        doc["gt_bbox"] = { { "center", detail::toJson(task.gtBox->center) },
                           { "size", detail::toJson(task.gtBox->size) } };
    if (task.distractorCount)
        doc["distractor_count"] = *task.distractorCount;
    if (task.viewDependent)
        doc["view_dependent"] = *task.viewDependent;
    return doc.dump();
}

auto loadTasks(std::filesystem::path const& path) -> std::vector<GroundingTask>
{
    std::ifstream in(path);
    if (!in)
        throw Error(fmt::format("cannot open {}", path.string()));
    std::vector<GroundingTask> tasks;
    std::string line;
    std::size_t lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try
        {
            tasks.push_back(taskFromJson(line));
        }
        catch (Error const& e)
        {
            throw ParseError(fmt::format("{}:{}: {}", path.string(), lineNo, e.what()));
        }
    }
    return tasks;
}

void saveTasks(std::filesystem::path const& path, std::vector<GroundingTask> const& tasks)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(fmt::format("cannot write {}", path.string()));
    for (auto const& task: tasks)
        out << taskToJson(task) << '\n';
}

} // namespace refground
