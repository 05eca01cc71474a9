// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <refground/geometry.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace refground
{

using ObjectId = int;
using IdSet = std::set<ObjectId>;

/// One detected object. Extents are full box sizes; rgb is the mean point color.
struct ObjectRecord
{
    ObjectId id = 0;
    std::string category;
    Vec3 center;
    Vec3 size;
    Rgb rgb {};

    [[nodiscard]] auto box() const -> Aabb { return { center, size }; }

    friend auto operator==(ObjectRecord const&, ObjectRecord const&) -> bool = default;
};

struct SceneTranscript
{
    std::string sceneId;
    Vec3 sceneCenter;
    std::vector<ObjectRecord> objects;

    [[nodiscard]] auto find(ObjectId id) const -> ObjectRecord const*;
    [[nodiscard]] auto ids() const -> IdSet;

    friend auto operator==(SceneTranscript const&, SceneTranscript const&) -> bool = default;
};

struct GroundingTask
{
    std::string taskId;
    std::string sceneId;
    std::string utterance;
    std::optional<ObjectId> gtObjectId;
    std::optional<Aabb> gtBox;
    std::optional<int> distractorCount;
    std::optional<bool> viewDependent;

    friend auto operator==(GroundingTask const&, GroundingTask const&) -> bool = default;
};

/// Number of decimals used for meters in the transcript.
inline constexpr int kTranscriptDecimals = 2;

/// Rounds to the transcript precision; never yields negative zero.
auto roundMeters(double value) -> double;

/// Checks record invariants: positive sizes, rgb range, unique ids, category syntax.
/// Throws SchemaError naming the first offending object.
void validateScene(SceneTranscript const& scene, bool requireObjects = true);

/// Parses the detection JSON document. The scene center defaults to the mean of object centers.
auto parseDetections(std::string_view json) -> SceneTranscript;
auto loadDetections(std::filesystem::path const& path) -> SceneTranscript;

/// Serializes a scene back to the detection JSON schema.
auto detectionsToJson(SceneTranscript const& scene) -> std::string;

/// Renders the object-centric transcript:
///
///     <scene_id>: Scene center: [x,y,z]. objs list:
///     <category>, id=<n>, ctr=[x,y,z], size=[sx,sy,sz], rgb=[r,g,b];
///
/// Objects keep input order. When `ids` is given only those objects are emitted; unknown ids
/// throw DomainError.
auto renderTranscript(SceneTranscript const& scene, std::optional<IdSet> const& ids = std::nullopt)
    -> std::string;

/// Inverse of renderTranscript. Blank lines and "..." elision lines are skipped.
/// Throws ParseError naming the offending line.
auto parseTranscript(std::string_view text) -> SceneTranscript;

/// Copy of `scene` restricted to `ids`, input order preserved.
auto restrictScene(SceneTranscript const& scene, IdSet const& ids) -> SceneTranscript;

// Task files are JSON Lines, one GroundingTask per line.
auto taskFromJson(std::string_view line) -> GroundingTask;
auto taskToJson(GroundingTask const& task) -> std::string;
auto loadTasks(std::filesystem::path const& path) -> std::vector<GroundingTask>;
void saveTasks(std::filesystem::path const& path, std::vector<GroundingTask> const& tasks);

/// Reads a whole file; throws Error when it cannot be opened.
auto readFile(std::filesystem::path const& path) -> std::string;

} // namespace refground
