// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <refground/reasoning.hpp>
#include <refground/scene.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace refground
{

enum class Difficulty
{
    Easy,
    Hard,
};

/// Easy iff the scene holds at most one distractor. Throws MetadataError without a count.
auto classifyDifficulty(GroundingTask const& task) -> Difficulty;

struct Bucket
{
    std::int64_t correct = 0;
    std::int64_t total = 0;

    [[nodiscard]] auto accuracy() const -> double { return total ? static_cast<double>(correct) / total : 0.0; }
    friend auto operator==(Bucket const&, Bucket const&) -> bool = default;
};

struct EvalReport
{
    Protocol protocol = Protocol::ReferIt3D;
    Bucket overall;
    Bucket easy;
    Bucket hard;
    Bucket viewDep;
    Bucket viewIndep;
    /// ScanRefer only; `overall` and the split buckets use the 0.25 threshold.
    Bucket at25;
    Bucket at50;

    friend auto operator==(EvalReport const&, EvalReport const&) -> bool = default;
};

using IdPredictions = std::map<std::string, std::optional<ObjectId>>;
using BoxPredictions = std::map<std::string, std::optional<Aabb>>;

/// Accuracy by exact id match. Every task needs gt_object_id, distractor_count and view_dependent
/// (MetadataError otherwise). Missing or absent predictions are incorrect; a prediction for a task
/// not in `tasks` is a DomainError.
auto scoreReferIt3D(IdPredictions const& predictions, std::vector<GroundingTask> const& tasks) -> EvalReport;

/// Accuracy at IoU >= 0.25 and >= 0.5. Every task needs gt_bbox. Split buckets are filled for tasks
/// that carry the metadata and skipped otherwise.
auto scoreScanRefer(BoxPredictions const& predictions, std::vector<GroundingTask> const& tasks) -> EvalReport;

inline constexpr double kIouLoose = 0.25;
inline constexpr double kIouStrict = 0.5;

/// Seeded sample of `n` tasks without replacement, reproducible across platforms.
/// Throws DomainError when n exceeds the task count.
auto sampleSubset(std::vector<GroundingTask> const& tasks, std::size_t n, std::uint64_t seed)
    -> std::vector<GroundingTask>;

auto reportToJson(EvalReport const& report) -> std::string;
auto reportFromJson(std::string_view json) -> EvalReport;

/// Fixed-width table: Overall, Easy, Hard, View Dep., View Indep. (plus acc@0.25/acc@0.5 for
/// ScanRefer), percentages with one decimal.
auto reportTable(EvalReport const& report) -> std::string;

} // namespace refground
