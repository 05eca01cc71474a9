// SPDX-License-Identifier: Apache-2.0
// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.
#include "generators.hpp"
#include "loop_scripts.hpp"
#include "oracles.hpp"

#include <refground/error.hpp>
#include <refground/eval.hpp>
#include <refground/geometry.hpp>
#include <refground/reasoning.hpp>
#include <refground/sandbox.hpp>
#include <refground/selfcorrect.hpp>

#include <fmt/format.h>

#include <chrono>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>

using namespace refground;
namespace fs = std::filesystem;

namespace
{

// Tolerances and budgets.
constexpr double kIouTolerance = 1e-2;
constexpr double kGeometryBudgetSeconds = 30.0;
constexpr double kRoundTripBudgetSeconds = 5.0;
constexpr double kCrossBoundaryTolerance = 1e-9;
constexpr int kIouPairs = 1000;
constexpr int kRoundTripScenes = 200;
constexpr int kFilterTasks = 100;
constexpr int kLoopRepeats = 10;
constexpr int kAnswerIds = 1000;
constexpr int kShimRequests = 500;
constexpr int kCrossBoundaryInputs = 100;

struct Verdict
{
    bool pass = false;
    std::string detail;
};

auto fixtures() -> fs::path
{
    return REFGROUND_FIXTURES;
}

auto secondsSince(std::chrono::steady_clock::time_point start) -> double
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

auto geometryOracle() -> Verdict
{
    auto const start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20240601);
    // room-scale boxes keep the 0.01 m lattice's own discretization error well under the tolerance
    std::uniform_real_distribution<double> c(-1.0, 1.0), s(1.0, 3.0);
    double worst = 0.0;
    int asymmetric = 0, badIdentity = 0, badDisjoint = 0;
    for (int i = 0; i < kIouPairs; ++i)
    {
        Aabb const a { { c(rng), c(rng), c(rng) }, { s(rng), s(rng), s(rng) } };
        Aabb const b { { c(rng), c(rng), c(rng) }, { s(rng), s(rng), s(rng) } };
        worst = std::max(worst, std::abs(iou3d(a, b) - oracle::voxelIou(a, b)));
        asymmetric += iou3d(a, b) != iou3d(b, a);
        badIdentity += iou3d(a, a) != 1.0;
        Aabb far = b;
        far.center.x = a.center.x + (a.size.x + b.size.x) / 2.0 + 0.5;
        badDisjoint += iou3d(a, far) != 0.0;
    }
    auto const elapsed = secondsSince(start);
    return { worst <= kIouTolerance && asymmetric == 0 && badIdentity == 0 && badDisjoint == 0
                 && elapsed < kGeometryBudgetSeconds,
             fmt::format("{} pairs, max |iou - voxel| = {:.5f} (tol {}), asymmetric {}, identity!=1 {}, disjoint!=0 "
                         "{}, {:.2f} s (budget {} s)",
                         kIouPairs, worst, kIouTolerance, asymmetric, badIdentity, badDisjoint, elapsed,
                         kGeometryBudgetSeconds) };
}

auto transcriptRoundTrip() -> Verdict
{
    auto const start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(77);
    int mismatches = 0;
    std::size_t objects = 0;
    for (int i = 0; i < kRoundTripScenes; ++i)
    {
        auto const scene = gen::randomScene(rng, i);
        objects += scene.objects.size();
        mismatches += parseTranscript(renderTranscript(scene)) != gen::roundedScene(scene);
    }
    auto const elapsed = secondsSince(start);
    return { mismatches == 0 && elapsed < kRoundTripBudgetSeconds,
             fmt::format("{} scenes ({} objects), {} mismatches, {:.3f} s (budget {} s)", kRoundTripScenes, objects,
                         mismatches, elapsed, kRoundTripBudgetSeconds) };
}

auto filterPreservation() -> Verdict
{
    auto const lexicon = Lexicon::load(REFGROUND_LEXICON);
    std::mt19937_64 rng(4242);
    int kept = 0;
    std::string firstMiss;
    for (int i = 0; i < kFilterTasks; ++i)
    {
        auto const c = gen::filterCase(rng, i, lexicon);
        if (filterLexical(c.scene, c.task.utterance, lexicon).keptIds.contains(*c.task.gtObjectId))
            ++kept;
        else if (firstMiss.empty())
            firstMiss = c.task.utterance;
    }
    return { kept == kFilterTasks, fmt::format("{}/{} targets kept{}", kept, kFilterTasks,
                                               firstMiss.empty() ? "" : "; first miss: " + firstMiss) };
}

auto loopConformance() -> Verdict
{
    LoopConfig config;
    config.retry.initialBackoff = std::chrono::milliseconds { 0 };
    auto const prompt = buildPrompt("s: Scene center: [0.00,0.00,1.25]. objs list:\n",
                                    "chair in the corner of the room, between white and yellow desks",
                                    PromptMode::Principles);
    std::vector<std::vector<std::string>> const scriptsList { scripts::direct(), scripts::buggyThenFixed(),
                                                              scripts::neverAnswers(config.maxRounds) };
    std::vector<Outcome> const wantOutcome { Outcome::Answered, Outcome::Answered, Outcome::MaxRounds };
    std::vector<int> const wantRounds { 2, 3, config.maxRounds };

    bool ok = true;
    int nondeterministic = 0;
    std::vector<std::string> seen;
    for (std::size_t k = 0; k < scriptsList.size(); ++k)
    {
        std::optional<ReasoningTrace> first;
        for (int rep = 0; rep < kLoopRepeats; ++rep)
        {
            Sandbox sandbox(scripts::fakeExecutor());
            ScriptedLlm llm(scriptsList[k]);
            auto const trace = runLoop(prompt, llm, sandbox, "acceptance", config);
            if (!first)
            {
                first = trace;
                ok = ok && trace.outcome == wantOutcome[k] && trace.roundsUsed == wantRounds[k];
                seen.push_back(fmt::format("{}/{}", toString(trace.outcome), trace.roundsUsed));
            }
            else if (traceToJson(trace) != traceToJson(*first))
            {
                ++nondeterministic;
            }
        }
    }
    return { ok && nondeterministic == 0,
             fmt::format("outcomes/rounds {{{}}} (want answered/2, answered/3, max_rounds/{}), {} divergent of {} "
                         "repeats",
                         fmt::join(seen, ", "), config.maxRounds, nondeterministic, kLoopRepeats * 3) };
}

auto answerExtraction() -> Verdict
{
    auto const sample = extractAnswer("Now the answer is complete -- {'ID':49}");
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> id(0, 1'000'000);
    int failures = 0;
    for (int i = 0; i < kAnswerIds; ++i)
    {
        auto const n = id(rng);
        failures += extractAnswer(formatAnswer(n)) != n;
    }
    return { sample == 49 && failures == 0,
             fmt::format("sample -> {}, {} of {} round trips failed", sample ? std::to_string(*sample) : "none",
                         failures, kAnswerIds) };
}

auto evalArithmetic() -> Verdict
{
    std::mt19937_64 rng(31337);
    std::uniform_int_distribution<int> d(0, 6), gt(0, 30);
    std::bernoulli_distribution coin(0.5), drop(0.15);
    int violations = 0;
    for (int set = 0; set < 100; ++set)
    {
        std::vector<GroundingTask> tasks;
        IdPredictions preds;
        for (int i = 0; i < 1 + set * 3; ++i)
        {
            auto const id = fmt::format("t{}", i);
            tasks.push_back({ id, "s", "u", gt(rng), std::nullopt, d(rng), coin(rng) });
            if (!drop(rng))
                preds[id] = coin(rng) ? *tasks.back().gtObjectId : gt(rng);
        }
        auto const r = scoreReferIt3D(preds, tasks);
        // count-weighted means of the buckets, compared as exact rational identities
        violations += r.easy.correct + r.hard.correct != r.overall.correct;
        violations += r.easy.total + r.hard.total != r.overall.total;
        violations += r.viewDep.correct + r.viewIndep.correct != r.overall.correct;
        violations += r.viewDep.total + r.viewIndep.total != r.overall.total;
    }

    // Ground-truth segmentation: predictions are boxes of actual scene objects, which do not overlap.
    int gtModeMismatch = 0;
    std::int64_t scored = 0, correct = 0;
    for (int sceneIndex = 0; sceneIndex < 20; ++sceneIndex)
    {
        std::vector<Aabb> boxes;
        std::uniform_real_distribution<double> size(0.3, 0.9), jitter(-0.05, 0.05);
        for (int gx = 0; gx < 4; ++gx)
            for (int gy = 0; gy < 4; ++gy)
                boxes.push_back({ { gx * 1.0 + jitter(rng), gy * 1.0 + jitter(rng), 0.5 }, { size(rng), size(rng), size(rng) } });
        std::vector<GroundingTask> tasks;
        BoxPredictions preds;
        std::uniform_int_distribution<std::size_t> pick(0, boxes.size() - 1);
        for (int i = 0; i < 25; ++i)
        {
            auto const id = fmt::format("s{}-t{}", sceneIndex, i);
            GroundingTask t { id, "s", "u", std::nullopt, boxes[pick(rng)], d(rng), coin(rng) };
            tasks.push_back(t);
            if (drop(rng))
                preds[id] = std::nullopt;
            else
                preds[id] = coin(rng) ? *t.gtBox : boxes[pick(rng)];
        }
        auto const r = scoreScanRefer(preds, tasks);
        gtModeMismatch += r.at25 != r.at50;
        violations += r.easy.correct + r.hard.correct != r.overall.correct;
        violations += r.viewDep.total + r.viewIndep.total != r.overall.total;
        scored += r.overall.total;
        correct += r.at25.correct;
    }
    return { violations == 0 && gtModeMismatch == 0 && correct > 0 && correct < scored,
             fmt::format("100 id-prediction sets: {} bucket identity violations; GT-segmentation: acc@0.25 != acc@0.5 "
                         "in {} of 20 scenes ({} of {} correct overall)",
                         violations, gtModeMismatch, correct, scored) };
}

auto selfCorrectionDataset() -> Verdict
{
    auto const lexicon = Lexicon::load(REFGROUND_LEXICON);
    auto const tasks = loadTasks(fixtures() / "finetune_tasks.jsonl");
    std::map<std::string, SceneTranscript> const scenes { { "scene0592_00",
                                                            loadDetections(fixtures() / "scenes" / "scene0592_00.json") } };
    auto const backend = ScriptedBackend::load(fixtures() / "finetune_script.json");
    GroundConfig config;
    config.lexicon = &lexicon;
    config.loop.retry.initialBackoff = std::chrono::milliseconds { 0 };
    Sandbox sandbox(scripts::fakeExecutor());
    auto const runs = collectRuns(
        tasks, scenes, [&](std::string const& id) { return backend.clientFor(id); }, sandbox, config);

    std::vector<LabeledTrace> corrected;
    std::size_t dropped = 0;
    for (auto const& item: runs.incorrect)
    {
        auto const r = elicitCorrection(item.trace, item.gtObjectId, *backend.clientFor(item.trace.taskId),
                                        config.loop.retry);
        if (r.usable)
            corrected.push_back({ r.clean, item.gtObjectId });
        else
            ++dropped;
    }
    auto const out = fs::temp_directory_path() / "refground_acceptance_finetune.jsonl";
    auto const written = emitDataset(runs.correct, corrected, out);

    // re-read and check independently of the emitter's own validation
    std::map<std::string, ObjectId> gt;
    for (auto const& t: tasks)
        gt[t.taskId] = *t.gtObjectId;
    auto const records = readDataset(out);
    fs::remove(out);
    int principleHits = 0, wrongAnswers = 0;
    for (auto const& record: records)
    {
        for (auto const& m: record.messages)
        {
            for (auto const& sentence: Principles::builtin().sentences())
                principleHits += m.content.find(sentence) != std::string::npos;
            principleHits += m.content.find(kPrinciplesHeader) != std::string::npos;
        }
        std::optional<ObjectId> answer;
        for (auto it = record.messages.rbegin(); it != record.messages.rend(); ++it)
            if (it->role == Role::Assistant)
            {
                try
                {
                    answer = extractAnswer(it->content);
                }
                catch (ParseError const&)
                {
                }
                break;
            }
        wrongAnswers += !answer || *answer != gt.at(record.taskId);
    }
    bool const countsOk = records.size() == written && records.size() == runs.correct.size() + corrected.size()
                          && dropped == runs.incorrect.size() - corrected.size();
    return { principleHits == 0 && wrongAnswers == 0 && countsOk && !records.empty(),
             fmt::format("{} records = {} correct + {} corrected, {} dropped; {} principle sentences, {} wrong final "
                         "answers",
                         records.size(), runs.correct.size(), corrected.size(), dropped, principleHits, wrongAnswers) };
}

auto py(double v) -> std::string
{
    return fmt::format("{:.17g}", v);
}

auto py(Vec3 v) -> std::string
{
    return fmt::format("({}, {}, {})", py(v.x), py(v.y), py(v.z));
}

auto shimConformance() -> Verdict
{
    std::vector<std::string> const command { REFGROUND_PYTHON, (fixtures() / "fake_shim.py").string() };
    ShimInterpreter shim(command);
    std::mt19937_64 rng(555);
    std::uniform_int_distribution<int> kind(0, 9);
    std::vector<std::string> const malformed { "{not json", "[1,2,3]", R"({"id":"x"})", R"j({"code":"print(1)"})j",
                                               "\"just a string\"", R"({"id":7,"code":12})" };
    int missing = 0, mismatched = 0, malformedSeen = 0;
    for (int i = 0; i < kShimRequests; ++i)
    {
        auto const id = fmt::format("req-{}", i);
        auto const k = kind(rng);
        std::string line;
        bool wellFormed = true;
        if (k == 0)
        {
            line = malformed[static_cast<std::size_t>(i) % malformed.size()] + "\n";
            wellFormed = false;
            ++malformedSeen;
        }
        else if (k == 1)
        {
            line = encodeShimRequest(id, "raise ValueError('boom')", false);
        }
        else
        {
            line = encodeShimRequest(id, fmt::format("acc = globals().get('acc', 0) + {}\nprint(acc)", k), false);
        }
        auto const reply = shim.exchangeRaw(line, std::chrono::seconds { 10 });
        if (!reply)
        {
            ++missing;
            continue;
        }
        try
        {
            auto const r = decodeShimResponse(*reply);
            if (wellFormed && r.id != id)
                ++mismatched;
            if (!wellFormed && r.status != ExecStatus::Error)
                ++mismatched;
        }
        catch (ParseError const&)
        {
            ++mismatched;
        }
    }
    bool const survived = shim.running() && shim.restarts() == 0;

    // persistence and reset
    auto const set = shim.run("p-1", "marker = 'kept'", false, std::chrono::seconds { 10 });
    auto const get = shim.run("p-2", "print(marker)", false, std::chrono::seconds { 10 });
    auto const cleared = shim.run("p-3", "print(marker)", true, std::chrono::seconds { 10 });
    bool const stateful = set.status == ExecStatus::Ok && get.stdoutText == "kept\n"
                          && cleared.status == ExecStatus::Error;

    // cross-boundary helper equivalence
    Sandbox sandbox(shimFactory(command));
    sandbox.execute({ "x", std::string(helperSource()), 30.0, false });
    std::uniform_real_distribution<double> u(-3.0, 3.0), s(0.2, 2.5);
    std::uniform_int_distribution<int> c(0, 255);
    std::vector<double> expected;
    double worst = 0.0;
    std::size_t count = 0;
    for (int i = 0; i < kCrossBoundaryInputs; ++i)
    {
        std::string code;
        auto const before = expected.size();
        Aabb const a { { u(rng), u(rng), u(rng) }, { s(rng), s(rng), s(rng) } };
        Aabb const b { { u(rng), u(rng), u(rng) }, { s(rng), s(rng), s(rng) } };
        code += fmt::format("print(repr(iou3d({}, {}, {}, {})))\n", py(a.center), py(a.size), py(b.center), py(b.size));
        expected.push_back(iou3d(a, b));
        Rgb const x { c(rng), c(rng), c(rng) }, y { c(rng), c(rng), c(rng) };
        code += fmt::format("print(repr(color_distance(rgb_to_hsl(({},{},{})), rgb_to_hsl(({},{},{})))))\n", x[0], x[1],
                            x[2], y[0], y[1], y[2]);
        expected.push_back(colorDistance(rgbToHsl(x), rgbToHsl(y)));
        Vec3 const p { u(rng), u(rng), u(rng) }, q { u(rng), u(rng), u(rng) };
        Vec3 n { u(rng), u(rng), u(rng) };
        n = n / norm(n);
        code += fmt::format("print(repr(point_plane_distance({}, {}, {})))\n", py(p), py(q), py(n));
        expected.push_back(pointPlaneDistance(p, { q, n }));
        code += fmt::format("print(repr(betweenness({}, {}, {})))\n", py(p), py(q), py(a.center));
        expected.push_back(betweenness(p, q, a.center));

        auto const r = sandbox.execute({ "x", code, 30.0, false });
        if (r.status != ExecStatus::Ok)
            worst = 1.0;
        std::istringstream in(r.stdoutText);
        for (std::string line; std::getline(in, line) && count < expected.size(); ++count)
            worst = std::max(worst, std::abs(std::stod(line) - expected[count]));
        if (count != expected.size() || count == before)
            worst = 1.0;
    }

    return { missing == 0 && mismatched == 0 && survived && stateful && worst <= kCrossBoundaryTolerance,
             fmt::format("{} requests ({} malformed): {} missing, {} mismatched, interpreter survived: {}; "
                         "persistence/reset: {}; helper max deviation {:.2e} over {} values (tol {})",
                         kShimRequests, malformedSeen, missing, mismatched, survived, stateful, worst,
                         expected.size(), kCrossBoundaryTolerance) };
}

} // namespace

int main()
{
    struct Criterion
    {
        std::string name;
        std::function<Verdict()> check;
    };
    std::vector<Criterion> const criteria {
        { "[PRIMARY] geometry oracle suite", geometryOracle },
        { "[PRIMARY] transcript round-trip", transcriptRoundTrip },
        { "[PRIMARY] filter target preservation", filterPreservation },
        { "[PRIMARY] loop conformance (scripted)", loopConformance },
        { "[PRIMARY] answer extraction", answerExtraction },
        { "[PRIMARY] eval arithmetic", evalArithmetic },
        { "[PRIMARY] self-correction dataset validity", selfCorrectionDataset },
        { "[SECONDARY] shim protocol conformance (fake shim)", shimConformance },
    };
    int failed = 0;
    for (auto const& c: criteria)
    {
        Verdict v;
        try
        {
            v = c.check();
        }
        catch (std::exception const& e)
        {
            v = { false, fmt::format("threw: {}", e.what()) };
        }
        failed += !v.pass;
        fmt::print("{} {}: {}\n", v.pass ? "PASS" : "FAIL", c.name, v.detail);
    }
    fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
