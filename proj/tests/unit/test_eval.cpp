// SPDX-License-Identifier: Apache-2.0
#include <refground/error.hpp>
#include <refground/eval.hpp>

#include <doctest.h>
#include <fmt/format.h>

#include <random>
#include <set>

using namespace refground;

namespace
{

auto task(std::string id, ObjectId gt, int distractors, bool viewDep) -> GroundingTask
{
    return { std::move(id), "s", "u", gt, std::nullopt, distractors, viewDep };
}

auto syntheticTasks(std::mt19937_64& rng, int n) -> std::vector<GroundingTask>
{
    std::uniform_int_distribution<int> d(0, 5), gt(0, 20);
    std::bernoulli_distribution coin(0.5);
    std::vector<GroundingTask> tasks;
    for (int i = 0; i < n; ++i)
        tasks.push_back(task(fmt::format("t{}", i), gt(rng), d(rng), coin(rng)));
    return tasks;
}

} // namespace

TEST_CASE("difficulty split")
{
    CHECK(classifyDifficulty(task("a", 1, 0, false)) == Difficulty::Easy);
    CHECK(classifyDifficulty(task("a", 1, 1, false)) == Difficulty::Easy);
    CHECK(classifyDifficulty(task("a", 1, 2, false)) == Difficulty::Hard);
    GroundingTask bare { "a", "s", "u", 1, std::nullopt, std::nullopt, false };
    CHECK_THROWS_AS(classifyDifficulty(bare), MetadataError);
}

TEST_CASE("referit3d scoring against a hand tally")
{
    std::vector<GroundingTask> const tasks { task("a", 1, 0, false), task("b", 2, 3, true), task("c", 3, 1, true),
                                             task("d", 4, 2, false) };
    IdPredictions const preds { { "a", 1 }, { "b", 9 }, { "c", 3 }, { "d", std::nullopt } };
    auto const r = scoreReferIt3D(preds, tasks);
    CHECK(r.overall == Bucket { 2, 4 });
    CHECK(r.easy == Bucket { 2, 2 });
    CHECK(r.hard == Bucket { 0, 2 });
    CHECK(r.viewDep == Bucket { 1, 2 });
    CHECK(r.viewIndep == Bucket { 1, 2 });
    CHECK(r.overall.accuracy() == 0.5);
}

TEST_CASE("bucket arithmetic identities on random prediction sets")
{
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> guess(0, 20);
    std::bernoulli_distribution drop(0.1);
    for (int round = 0; round < 50; ++round)
    {
        auto const tasks = syntheticTasks(rng, 1 + round * 7);
        IdPredictions preds;
        for (auto const& t: tasks)
            if (!drop(rng))
                preds[t.taskId] = guess(rng);
        auto const r = scoreReferIt3D(preds, tasks);
        CHECK(r.easy.total + r.hard.total == r.overall.total);
        CHECK(r.easy.correct + r.hard.correct == r.overall.correct);
        CHECK(r.viewDep.total + r.viewIndep.total == r.overall.total);
        CHECK(r.viewDep.correct + r.viewIndep.correct == r.overall.correct);
        CHECK(r.overall.total == static_cast<std::int64_t>(tasks.size()));
    }
}

TEST_CASE("metadata and unknown-task errors")
{
    std::vector<GroundingTask> tasks { task("a", 1, 0, false) };
    CHECK_THROWS_AS(scoreReferIt3D({ { "zzz", 1 } }, tasks), DomainError);
    tasks[0].viewDependent.reset();
    CHECK_THROWS_AS(scoreReferIt3D({}, tasks), MetadataError);
    tasks[0] = task("a", 1, 0, false);
    tasks[0].gtObjectId.reset();
    CHECK_THROWS_AS(scoreReferIt3D({}, tasks), MetadataError);
    CHECK_THROWS_AS(scoreScanRefer({}, { task("a", 1, 0, false) }), MetadataError);
}

TEST_CASE("scanrefer thresholds")
{
    Aabb const gt { { 0, 0, 0 }, { 2, 2, 2 } };
    auto make = [&](std::string id, std::optional<int> d) {
        GroundingTask t { std::move(id), "s", "u", std::nullopt, gt, d, std::nullopt };
        return t;
    };
    std::vector<GroundingTask> const tasks { make("exact", 0), make("third", 3), make("far", std::nullopt),
                                             make("none", 1) };
    BoxPredictions const preds {
        { "exact", gt },
        { "third", Aabb { { 1, 0, 0 }, { 2, 2, 2 } } }, // IoU 1/3
        { "far", Aabb { { 9, 0, 0 }, { 2, 2, 2 } } },
        { "none", std::nullopt },
    };
    auto const r = scoreScanRefer(preds, tasks);
    CHECK(r.protocol == Protocol::ScanRefer);
    CHECK(r.at25 == Bucket { 2, 4 });
    CHECK(r.at50 == Bucket { 1, 4 });
    CHECK(r.overall == r.at25);
    // only tasks with a distractor count land in the difficulty buckets
    CHECK(r.easy == Bucket { 1, 2 });
    CHECK(r.hard == Bucket { 1, 1 });
    CHECK(r.viewDep.total + r.viewIndep.total == 0);
}

TEST_CASE("sampleSubset is seeded, distinct and pinned")
{
    std::mt19937_64 rng(0);
    auto const tasks = syntheticTasks(rng, 30);
    auto const a = sampleSubset(tasks, 10, 42);
    auto const b = sampleSubset(tasks, 10, 42);
    CHECK(a == b);
    std::set<std::string> ids;
    for (auto const& t: a)
        ids.insert(t.taskId);
    CHECK(ids.size() == 10);
    CHECK(sampleSubset(tasks, 10, 43) != a);
    CHECK(sampleSubset(tasks, 30, 1).size() == 30);
    CHECK(sampleSubset(tasks, 0, 1).empty());
    CHECK_THROWS_AS(sampleSubset(tasks, 31, 1), DomainError);

    // expected draw from tests/support/mt64_sample.py 30 5 2024
    std::vector<std::string> first;
    for (auto const& t: sampleSubset(tasks, 5, 2024))
        first.push_back(t.taskId);
    CHECK(first == std::vector<std::string> { "t4", "t15", "t27", "t19", "t26" });
}

TEST_CASE("report json round trip and table")
{
    EvalReport r;
    r.overall = { 7, 10 };
    r.easy = { 4, 5 };
    r.hard = { 3, 5 };
    r.viewDep = { 2, 4 };
    r.viewIndep = { 5, 6 };
    CHECK(reportFromJson(reportToJson(r)) == r);
    auto const table = reportTable(r);
    CHECK(table.find("Overall") != std::string::npos);
    CHECK(table.find("70.0") != std::string::npos);
    CHECK(table.find("acc@0.5") == std::string::npos);

    r.protocol = Protocol::ScanRefer;
    r.at25 = { 7, 10 };
    r.at50 = { 5, 10 };
    CHECK(reportFromJson(reportToJson(r)) == r);
    CHECK(reportTable(r).find("50.0") != std::string::npos);
}
