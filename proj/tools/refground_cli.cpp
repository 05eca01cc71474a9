// SPDX-License-Identifier: Apache-2.0
#include <refground/error.hpp>
#include <refground/eval.hpp>
#include <refground/filter.hpp>
#include <refground/parallel.hpp>
#include <refground/reasoning.hpp>
#include <refground/sandbox.hpp>
#include <refground/scene.hpp>
#include <refground/selfcorrect.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace refground;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitTaskFailure = 1;
constexpr int kExitInputError = 2;

struct RunConfig
{
    std::string backend;
    std::string model = "gpt-4";
    std::string baseUrl = "https://api.openai.com/v1";
    std::string apiKeyEnv = "OPENAI_API_KEY";
    double requestsPerSecond = 1.0;
    std::string mode = "principles";
    std::string filter = "lexical";
    std::string protocol = "referit3d";
    int maxRounds = 10;
    int jobs = 1;
    std::uint64_t seed = 0;
    std::size_t subset = 0;
    double execTimeout = 10.0;
    std::string tasks;
    std::string scenes;
    std::string out = "out";
    std::string shim;
    std::string lexicon = REFGROUND_DEFAULT_LEXICON;
    std::string principles;
    std::string taskId;
};

/// Values from --config apply to every option the command line did not set.
void applyConfigFile(RunConfig& cfg, CLI::App const& app, std::string const& path)
{
    auto const doc = nlohmann::json::parse(readFile(path), nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
        throw ParseError(fmt::format("{}: config must be a JSON object", path));

    auto set = [&](char const* key, char const* flag, auto& target) {
        if (!doc.contains(key))
            return;
        if (auto const* opt = app.get_option_no_throw(flag); opt && opt->count() > 0)
            return;
        try
        {
            doc.at(key).get_to(target);
        }
        catch (nlohmann::json::exception const& e)
        {
            throw ParseError(fmt::format("{}: field '{}': {}", path, key, e.what()));
        }
    };
    set("backend", "--backend", cfg.backend);
    set("model", "--model", cfg.model);
    set("base_url", "--base-url", cfg.baseUrl);
    set("api_key_env", "--api-key-env", cfg.apiKeyEnv);
    set("requests_per_second", "--rps", cfg.requestsPerSecond);
    set("mode", "--mode", cfg.mode);
    set("filter", "--filter", cfg.filter);
    set("protocol", "--protocol", cfg.protocol);
    set("max_rounds", "--max-rounds", cfg.maxRounds);
    set("jobs", "--jobs", cfg.jobs);
    set("seed", "--seed", cfg.seed);
    set("subset", "--subset", cfg.subset);
    set("exec_timeout", "--exec-timeout", cfg.execTimeout);
    set("tasks", "--tasks", cfg.tasks);
    set("scenes", "--scenes", cfg.scenes);
    set("out", "--out", cfg.out);
    set("shim", "--shim", cfg.shim);
    set("lexicon", "--lexicon", cfg.lexicon);
    set("principles", "--principles", cfg.principles);
}

void addRunOptions(CLI::App& cmd, RunConfig& cfg, std::string& configPath)
{
    cmd.add_option("--config", configPath, "JSON file with defaults for the options below");
    cmd.add_option("--backend", cfg.backend, "scripted:<fixture.json> or live");
    cmd.add_option("--model", cfg.model, "Model name for the live backend");
    cmd.add_option("--base-url", cfg.baseUrl, "Chat-completions base URL for the live backend");
    cmd.add_option("--api-key-env", cfg.apiKeyEnv, "Environment variable holding the API key");
    cmd.add_option("--rps", cfg.requestsPerSecond, "Request rate limit shared by all live sessions");
    cmd.add_option("--mode", cfg.mode, "principles | no_principles");
    cmd.add_option("--filter", cfg.filter, "lexical | llm");
    cmd.add_option("--protocol", cfg.protocol, "referit3d (object id) | scanrefer (bounding box)");
    cmd.add_option("--max-rounds", cfg.maxRounds, "LLM calls allowed per task");
    cmd.add_option("--jobs", cfg.jobs, "Concurrent grounding sessions");
    cmd.add_option("--seed", cfg.seed, "Seed for --subset sampling");
    cmd.add_option("--subset", cfg.subset, "Evaluate a seeded random sample of this many tasks");
    cmd.add_option("--exec-timeout", cfg.execTimeout, "Seconds per code snippet");
    cmd.add_option("--tasks", cfg.tasks, "Task JSONL file");
    cmd.add_option("--scenes", cfg.scenes, "Directory of <scene_id>.json detection files");
    cmd.add_option("--out", cfg.out, "Output directory");
    cmd.add_option("--shim", cfg.shim, "Interpreter shim command line, e.g. \"python3 shim.py\"");
    cmd.add_option("--lexicon", cfg.lexicon, "Synonym lexicon JSON");
    cmd.add_option("--principles", cfg.principles, "Principles file, one sentence per line");
}

struct Engine
{
    std::function<std::shared_ptr<LlmClient>(std::string const&)> llmFor;
    std::unique_ptr<Sandbox> sandbox;
    Lexicon lexicon;
    std::optional<Principles> principles;
    GroundConfig ground;
};

auto splitCommand(std::string const& line) -> std::vector<std::string>
{
    std::istringstream in(line);
    std::vector<std::string> parts;
    std::string part;
    while (in >> part)
        parts.push_back(part);
    return parts;
}

auto makeEngine(RunConfig const& cfg) -> Engine
{
    if (cfg.jobs < 1)
        throw DomainError("--jobs must be at least 1");
    if (cfg.backend.empty())
        throw DomainError("no backend configured; pass --backend scripted:<file> or --backend live");

    Engine engine;
    if (cfg.backend.starts_with("scripted:"))
    {
        auto backend = std::make_shared<ScriptedBackend>(ScriptedBackend::load(cfg.backend.substr(9)));
        engine.llmFor = [backend](std::string const& taskId) { return backend->clientFor(taskId); };
        engine.ground.loop.retry.initialBackoff = std::chrono::milliseconds { 0 };
    }
    else if (cfg.backend == "live")
    {
        auto limiter = std::make_shared<RateLimiter>(cfg.requestsPerSecond);
        HttpLlmConfig http;
        http.baseUrl = cfg.baseUrl;
        http.model = cfg.model;
        http.apiKeyEnv = cfg.apiKeyEnv;
        engine.llmFor = [http, limiter](std::string const&) { return std::make_shared<HttpLlm>(http, limiter); };
    }
    else
    {
        throw DomainError(fmt::format("unknown backend '{}'", cfg.backend));
    }

    if (!cfg.shim.empty())
    {
        engine.sandbox = std::make_unique<Sandbox>(shimFactory(splitCommand(cfg.shim)));
    }
    else
    {
        engine.sandbox = std::make_unique<Sandbox>(fakeFactory([](std::string const&, bool) {
            return ExecResult { "", "code execution is disabled: no interpreter shim configured (--shim)",
                                ExecStatus::Error, 0.0 };
        }));
    }

    if (!cfg.lexicon.empty() && fs::exists(cfg.lexicon))
        engine.lexicon = Lexicon::load(cfg.lexicon);
    if (!cfg.principles.empty())
        engine.principles = Principles::load(cfg.principles);

    engine.ground.mode = promptModeFromString(cfg.mode);
    engine.ground.filter = cfg.filter == "llm" ? FilterMethod::Llm : FilterMethod::Lexical;
    if (cfg.filter != "llm" && cfg.filter != "lexical")
        throw DomainError(fmt::format("unknown filter '{}'", cfg.filter));
    engine.ground.protocol = protocolFromString(cfg.protocol);
    engine.ground.loop.maxRounds = cfg.maxRounds;
    engine.ground.loop.execTimeoutSeconds = cfg.execTimeout;
    return engine;
}

// GroundConfig points into the engine, so bind after the engine has reached its final address.
void bindPointers(Engine& engine)
{
    engine.ground.lexicon = &engine.lexicon;
    engine.ground.principles = engine.principles ? &*engine.principles : nullptr;
}

auto loadScenes(std::string const& dir, std::vector<GroundingTask> const& tasks) -> std::map<std::string, SceneTranscript>
{
    if (dir.empty())
        throw DomainError("--scenes is required");
    std::map<std::string, SceneTranscript> scenes;
    for (auto const& task: tasks)
        if (!scenes.contains(task.sceneId))
            scenes.emplace(task.sceneId, loadDetections(fs::path(dir) / (task.sceneId + ".json")));
    return scenes;
}

auto loadTaskList(RunConfig const& cfg) -> std::vector<GroundingTask>
{
    if (cfg.tasks.empty())
        throw DomainError("--tasks is required");
    auto tasks = loadTasks(cfg.tasks);
    if (cfg.subset > 0)
        tasks = sampleSubset(tasks, cfg.subset, cfg.seed);
    return tasks;
}

void writeLines(fs::path const& path, std::vector<std::string> const& lines)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(fmt::format("cannot write {}", path.string()));
    for (auto const& line: lines)
        out << line << '\n';
}

auto fmtBox(Aabb const& box) -> std::string
{
    return fmt::format("center=[{:.2f},{:.2f},{:.2f}] size=[{:.2f},{:.2f},{:.2f}]", box.center.x, box.center.y,
                       box.center.z, box.size.x, box.size.y, box.size.z);
}

auto cmdTranscribe(std::string const& scenePath, std::string const& utterance, std::string const& lexiconPath) -> int
{
    auto const scene = loadDetections(scenePath);
    if (utterance.empty())
    {
        std::cout << renderTranscript(scene);
        return kExitOk;
    }
    Lexicon lexicon;
    if (!lexiconPath.empty() && fs::exists(lexiconPath))
        lexicon = Lexicon::load(lexiconPath);
    auto const filtered = filterLexical(scene, utterance, lexicon);
    std::cout << renderTranscript(scene, filtered.keptIds);
    return kExitOk;
}

auto cmdGround(RunConfig const& cfg) -> int
{
    auto engine = makeEngine(cfg);
    bindPointers(engine);
    if (cfg.taskId.empty())
        throw DomainError("--task-id is required");
    if (cfg.tasks.empty())
        throw DomainError("--tasks is required");
    auto const tasks = loadTasks(cfg.tasks);
    auto it = std::ranges::find(tasks, cfg.taskId, &GroundingTask::taskId);
    if (it == tasks.end())
        throw DomainError(fmt::format("unknown task id {}", cfg.taskId));
    auto const scenes = loadScenes(cfg.scenes, { *it });

    auto llm = engine.llmFor(it->taskId);
    auto const result = ground(*it, scenes.at(it->sceneId), *llm, *engine.sandbox, engine.ground);

    fs::create_directories(cfg.out);
    writeLines(fs::path(cfg.out) / "traces.jsonl", { traceToJson(result.trace) });

    if (result.trace.outcome != Outcome::Answered)
    {
        std::cerr << fmt::format("task {}: no answer ({}{})\n", it->taskId, toString(result.trace.outcome),
                                 result.trace.abortCause ? ": " + *result.trace.abortCause : "");
        return kExitTaskFailure;
    }
    if (engine.ground.protocol == Protocol::ScanRefer)
    {
        if (!result.box)
        {
            std::cerr << fmt::format("task {}: predicted id {} is not in the scene\n", it->taskId, *result.objectId);
            return kExitTaskFailure;
        }
        std::cout << fmtBox(*result.box) << '\n';
    }
    else
    {
        std::cout << *result.objectId << '\n';
    }
    return kExitOk;
}

auto cmdEval(RunConfig const& cfg) -> int
{
    auto engine = makeEngine(cfg);
    bindPointers(engine);
    auto const tasks = loadTaskList(cfg);
    auto const scenes = loadScenes(cfg.scenes, tasks);

    std::vector<GroundingResult> results(tasks.size());
    parallelFor(tasks.size(), cfg.jobs, [&](std::size_t i) {
        auto const& task = tasks[i];
        try
        {
            auto llm = engine.llmFor(task.taskId);
            results[i] = ground(task, scenes.at(task.sceneId), *llm, *engine.sandbox, engine.ground);
        }
        catch (Error const& e)
        {
            results[i].trace.taskId = task.taskId;
            results[i].trace.outcome = Outcome::Aborted;
            results[i].trace.abortCause = e.what();
        }
    });

    EvalReport report;
    if (engine.ground.protocol == Protocol::ScanRefer)
    {
        BoxPredictions predictions;
        for (std::size_t i = 0; i < tasks.size(); ++i)
            predictions[tasks[i].taskId] = results[i].box;
        report = scoreScanRefer(predictions, tasks);
    }
    else
    {
        IdPredictions predictions;
        for (std::size_t i = 0; i < tasks.size(); ++i)
            predictions[tasks[i].taskId] = results[i].objectId;
        report = scoreReferIt3D(predictions, tasks);
    }

    fs::create_directories(cfg.out);
    std::vector<std::string> traceLines;
    for (auto const& r: results)
        traceLines.push_back(traceToJson(r.trace));
    writeLines(fs::path(cfg.out) / "traces.jsonl", traceLines);
    writeLines(fs::path(cfg.out) / "report.json", { reportToJson(report) });
    auto const table = reportTable(report);
    writeLines(fs::path(cfg.out) / "report.txt", { table });
    std::cout << table;
    return kExitOk;
}

auto cmdBuildFinetune(RunConfig const& cfg) -> int
{
    auto engine = makeEngine(cfg);
    bindPointers(engine);
    auto const tasks = loadTaskList(cfg);
    auto const scenes = loadScenes(cfg.scenes, tasks);
    auto const& principles = engine.principles ? *engine.principles : Principles::builtin();

    auto const runs = collectRuns(tasks, scenes, engine.llmFor, *engine.sandbox, engine.ground, cfg.jobs);

    std::vector<CorrectionResult> corrections(runs.incorrect.size());
    parallelFor(runs.incorrect.size(), cfg.jobs, [&](std::size_t i) {
        auto const& item = runs.incorrect[i];
        auto llm = engine.llmFor(item.trace.taskId);
        corrections[i] = elicitCorrection(item.trace, item.gtObjectId, *llm, engine.ground.loop.retry);
    });

    std::vector<LabeledTrace> corrected;
    nlohmann::ordered_json drops = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < corrections.size(); ++i)
    {
        if (corrections[i].usable)
        {
            corrected.push_back({ corrections[i].clean, runs.incorrect[i].gtObjectId });
        }
        else
        {
            drops.push_back({ { "task_id", runs.incorrect[i].trace.taskId }, { "reason", corrections[i].dropReason } });
            std::cerr << fmt::format("dropped {}: {}\n", runs.incorrect[i].trace.taskId, corrections[i].dropReason);
        }
    }

    fs::create_directories(cfg.out);
    std::size_t records = 0;
    try
    {
        records = emitDataset(runs.correct, corrected, fs::path(cfg.out) / "finetune.jsonl", principles);
    }
    catch (SchemaError const& e)
    {
        std::cerr << "validation failed: " << e.what() << '\n';
        return kExitTaskFailure;
    }

    nlohmann::ordered_json stats;
    stats["records"] = records;
    stats["correct_first_try"] = runs.correct.size();
    stats["self_corrected"] = corrected.size();
    stats["dropped"] = drops.size();
    stats["drops"] = drops;
    writeLines(fs::path(cfg.out) / "finetune_stats.json", { stats.dump(2) });
    std::cout << fmt::format("records={} correct_first_try={} self_corrected={} dropped={}\n", records,
                             runs.correct.size(), corrected.size(), drops.size());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "Resolve 3D referring expressions with an LLM reasoning loop over scene transcripts" };
    app.require_subcommand(1);

    std::string scenePath;
    std::string utterance;
    std::string lexiconPath = REFGROUND_DEFAULT_LEXICON;
    auto* transcribe = app.add_subcommand("transcribe", "Print the scene transcript, filtered by an utterance if given");
    transcribe->add_option("scene", scenePath, "Detection JSON file")->required();
    transcribe->add_option("--utterance", utterance, "Referring expression used to filter objects");
    transcribe->add_option("--lexicon", lexiconPath, "Synonym lexicon JSON");

    RunConfig cfg;
    std::string configPath;
    auto* groundCmd = app.add_subcommand("ground", "Ground one task and write its trace");
    addRunOptions(*groundCmd, cfg, configPath);
    groundCmd->add_option("--task-id", cfg.taskId, "Task to ground")->required();

    auto* evalCmd = app.add_subcommand("eval", "Ground a task set and write an accuracy report");
    addRunOptions(*evalCmd, cfg, configPath);

    auto* finetuneCmd = app.add_subcommand("build-finetune", "Build a self-corrected fine-tuning dataset");
    addRunOptions(*finetuneCmd, cfg, configPath);

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        auto const code = app.exit(e);
        return code == 0 ? kExitOk : kExitInputError;
    }

    try
    {
        if (transcribe->parsed())
            return cmdTranscribe(scenePath, utterance, lexiconPath);

        auto* active = groundCmd->parsed() ? groundCmd : (evalCmd->parsed() ? evalCmd : finetuneCmd);
        if (!configPath.empty())
            applyConfigFile(cfg, *active, configPath);
        if (groundCmd->parsed())
            return cmdGround(cfg);
        if (evalCmd->parsed())
            return cmdEval(cfg);
        return cmdBuildFinetune(cfg);
    }
    catch (Error const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInputError;
    }
}
