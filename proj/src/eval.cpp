// SPDX-License-Identifier: Apache-2.0
#include "json_util.hpp"

#include <refground/error.hpp>
#include <refground/eval.hpp>

#include <fmt/format.h>

#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace refground
{

using detail::json;

auto classifyDifficulty(GroundingTask const& task) -> Difficulty
{
    if (!task.distractorCount)
        throw MetadataError(fmt::format("task {} has no distractor_count", task.taskId));
    return *task.distractorCount <= 1 ? Difficulty::Easy : Difficulty::Hard;
}

namespace
{
    template<typename Predictions>
    void checkKnown(Predictions const& predictions, std::vector<GroundingTask> const& tasks)
    {
        std::set<std::string> known;
        for (auto const& t: tasks)
            if (!known.insert(t.taskId).second)
                throw DomainError(fmt::format("task {} listed twice", t.taskId));
        for (auto const& [taskId, _]: predictions)
            if (!known.contains(taskId))
                throw DomainError(fmt::format("prediction for unknown task {}", taskId));
    }

    void tally(Bucket& bucket, bool correct)
    {
        ++bucket.total;
        bucket.correct += correct ? 1 : 0;
    }
} // namespace

auto scoreReferIt3D(IdPredictions const& predictions, std::vector<GroundingTask> const& tasks) -> EvalReport
{
    checkKnown(predictions, tasks);
    EvalReport report;
    report.protocol = Protocol::ReferIt3D;
    for (auto const& task: tasks)
    {
        if (!task.gtObjectId)
            throw MetadataError(fmt::format("task {} has no gt_object_id", task.taskId));
        if (!task.viewDependent)
            throw MetadataError(fmt::format("task {} has no view_dependent flag", task.taskId));
        auto const difficulty = classifyDifficulty(task);

        auto it = predictions.find(task.taskId);
        bool const correct = it != predictions.end() && it->second && *it->second == *task.gtObjectId;
        tally(report.overall, correct);
        tally(difficulty == Difficulty::Easy ? report.easy : report.hard, correct);
        tally(*task.viewDependent ? report.viewDep : report.viewIndep, correct);
    }
    return report;
}

auto scoreScanRefer(BoxPredictions const& predictions, std::vector<GroundingTask> const& tasks) -> EvalReport
{
    checkKnown(predictions, tasks);
    EvalReport report;
    report.protocol = Protocol::ScanRefer;
    for (auto const& task: tasks)
    {
        if (!task.gtBox)
            throw MetadataError(fmt::format("task {} has no gt_bbox", task.taskId));
        auto it = predictions.find(task.taskId);
        auto const iou = (it != predictions.end() && it->second) ? iou3d(*it->second, *task.gtBox) : 0.0;
        bool const hasPrediction = it != predictions.end() && it->second;
        bool const loose = hasPrediction && iou >= kIouLoose;
        bool const strict = hasPrediction && iou >= kIouStrict;

        tally(report.at25, loose);
        tally(report.at50, strict);
        tally(report.overall, loose);
        if (task.distractorCount)
            tally(classifyDifficulty(task) == Difficulty::Easy ? report.easy : report.hard, loose);
        if (task.viewDependent)
            tally(*task.viewDependent ? report.viewDep : report.viewIndep, loose);
    }
    return report;
}

auto sampleSubset(std::vector<GroundingTask> const& tasks, std::size_t n, std::uint64_t seed)
    -> std::vector<GroundingTask>
{
    if (n > tasks.size())
        throw DomainError(fmt::format("cannot sample {} of {} tasks", n, tasks.size()));

    // std::uniform_int_distribution is implementation-defined; draw bounded values by rejection
    // from the fully specified mt19937_64 stream instead.
    std::mt19937_64 rng(seed);
    auto bounded = [&rng](std::uint64_t bound) {
        auto const limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
        for (;;)
        {
            auto const v = rng();
            if (v < limit)
                return v % bound;
        }
    };

    std::vector<std::size_t> order(tasks.size());
    std::iota(order.begin(), order.end(), std::size_t { 0 });
    for (std::size_t i = 0; i < n; ++i)
    {
        auto const j = i + bounded(tasks.size() - i);
        std::swap(order[i], order[j]);
    }
    std::vector<GroundingTask> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(tasks[order[i]]);
    return out;
}

namespace
{
    auto bucketJson(Bucket const& b) -> nlohmann::ordered_json
    {
        nlohmann::ordered_json j;
        j["accuracy"] = b.accuracy();
        j["correct"] = b.correct;
        j["total"] = b.total;
        return j;
    }

    auto bucketFrom(json const& doc, char const* key) -> Bucket
    {
        auto const& b = detail::field(doc, key, "$");
        return { b.at("correct").get<std::int64_t>(), b.at("total").get<std::int64_t>() };
    }
} // namespace

auto reportToJson(EvalReport const& report) -> std::string
{
    nlohmann::ordered_json doc;
    doc["protocol"] = toString(report.protocol);
    doc["overall"] = bucketJson(report.overall);
    doc["easy"] = bucketJson(report.easy);
    doc["hard"] = bucketJson(report.hard);
    doc["view_dep"] = bucketJson(report.viewDep);
    doc["view_indep"] = bucketJson(report.viewIndep);
    if (report.protocol == Protocol::ScanRefer)
    {
        doc["acc_at_25"] = bucketJson(report.at25);
        doc["acc_at_50"] = bucketJson(report.at50);
    }
    return doc.dump(2);
}

auto reportFromJson(std::string_view text) -> EvalReport
{
    auto const doc = detail::parseJson(text, "report");
    EvalReport report;
    try
    {
        report.protocol = protocolFromString(detail::asString(detail::field(doc, "protocol", "$"), "$.protocol"));
        report.overall = bucketFrom(doc, "overall");
        report.easy = bucketFrom(doc, "easy");
        report.hard = bucketFrom(doc, "hard");
        report.viewDep = bucketFrom(doc, "view_dep");
        report.viewIndep = bucketFrom(doc, "view_indep");
        if (report.protocol == Protocol::ScanRefer)
        {
            report.at25 = bucketFrom(doc, "acc_at_25");
            report.at50 = bucketFrom(doc, "acc_at_50");
        }
    }
    catch (json::exception const& e)
    {
        throw ParseError(fmt::format("report: {}", e.what()));
    }
    return report;
}

auto reportTable(EvalReport const& report) -> std::string
{
    auto pct = [](Bucket const& b) { return fmt::format("{:.1f}", 100.0 * b.accuracy()); };
    std::string out;
    if (report.protocol == Protocol::ScanRefer)
    {
        out += fmt::format("{:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n", "acc@0.25", "acc@0.5", "Overall",
                           "Easy", "Hard", "View Dep.", "View Ind.");
        out += fmt::format("{:>10} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}\n", pct(report.at25), pct(report.at50),
                           pct(report.overall), pct(report.easy), pct(report.hard), pct(report.viewDep),
                           pct(report.viewIndep));
    }
    else
    {
        out += fmt::format("{:>10} {:>10} {:>10} {:>10} {:>10}\n", "Overall", "Easy", "Hard", "View Dep.", "View Ind.");
        out += fmt::format("{:>10} {:>10} {:>10} {:>10} {:>10}\n", pct(report.overall), pct(report.easy),
                           pct(report.hard), pct(report.viewDep), pct(report.viewIndep));
    }
    out += fmt::format("{:>10} {:>10} {:>10} {:>10} {:>10}\n", report.overall.total, report.easy.total,
                       report.hard.total, report.viewDep.total, report.viewIndep.total);
    return out;
}

} // namespace refground
