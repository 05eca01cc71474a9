// SPDX-License-Identifier: Apache-2.0
#include "json_util.hpp"

#include <refground/error.hpp>
#include <refground/reasoning.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

namespace refground
{

using detail::json;

auto toString(PromptMode mode) -> char const*
{
    return mode == PromptMode::Principles ? "principles" : "no_principles";
}

auto promptModeFromString(std::string_view name) -> PromptMode
{
    if (name == "principles")
        return PromptMode::Principles;
    if (name == "no_principles")
        return PromptMode::NoPrinciples;
    throw DomainError(fmt::format("unknown prompt mode '{}'", name));
}

// Principles

Principles::Principles(std::vector<std::string> sentences): _sentences(std::move(sentences))
{
    std::erase_if(_sentences, [](std::string const& s) { return s.find_first_not_of(" \t\r") == std::string::npos; });
}

auto Principles::builtin() -> Principles const&
{
    static Principles const instance({
        "Compare colors in HSL space: convert rgb values with rgb_to_hsl and rank candidates with color_distance "
        "instead of comparing raw RGB numbers.",
        "Resolve left, right, front and behind with vector operations from the observer's viewpoint, for example "
        "left_right_of(anchor, candidate, default_observer(SCENE_CENTER)), never by comparing raw x or y coordinates.",
        "To decide which object is closer to a wall, compute the point-to-plane distance from the object center to "
        "the wall face with wall_face_distance or point_plane_distance.",
        "An object is in a corner when the sum of its distances to the two nearest walls, as given by corner_score, "
        "is small compared to the other candidates.",
        "For a between relation, score every candidate with betweenness(a, b, x) against the two reference objects.",
        "An object lies on top of another when its bottom is close to the other's top and their horizontal extents "
        "overlap.",
        "When several objects match the category, compute a score for every candidate in code before choosing.",
    });
    return instance;
}

auto Principles::load(std::filesystem::path const& path) -> Principles
{
    std::istringstream in(readFile(path));
    std::vector<std::string> sentences;
    std::string line;
    while (std::getline(in, line))
    {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
            line.pop_back();
        sentences.push_back(line);
    }
    return Principles(std::move(sentences));
}

auto Principles::findIn(std::string_view text) const -> std::optional<std::string>
{
    for (auto const& s: _sentences)
        if (text.find(s) != std::string_view::npos)
            return s;
    return std::nullopt;
}

auto Principles::strip(std::string_view text) const -> std::string
{
    std::istringstream in { std::string(text) };
    std::string out;
    std::string line;
    bool first = true;
    while (std::getline(in, line))
    {
        if (line == kPrinciplesHeader || findIn(line))
            continue;
        if (!first)
            out += '\n';
        out += line;
        first = false;
    }
    while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back())))
        out.pop_back();
    return out;
}

// Answer contract

auto formatAnswer(ObjectId id) -> std::string
{
    return fmt::format("{} -- {{'ID':{}}}", kCompletionMarker, id);
}

auto extractAnswer(std::string_view text) -> std::optional<ObjectId>
{
    std::string lowered(text);
    std::ranges::transform(lowered, lowered.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    constexpr std::string_view kKey = "answer is complete";
    auto const at = lowered.rfind(kKey);
    if (at == std::string::npos)
        return std::nullopt;

    static std::regex const payload { R"(^\s*-*\s*\{\s*['"]?ID['"]?\s*:\s*(['"]?)(\d{1,9})\1\s*\})",
                                      std::regex::icase };
    auto const tail = std::string(text.substr(at + kKey.size()));
    std::smatch m;
    if (!std::regex_search(tail, m, payload, std::regex_constants::match_continuous))
    {
        auto const shown = tail.substr(0, std::min<std::size_t>(tail.size(), 40));
        throw ParseError(fmt::format("malformed answer payload after completion marker: '{}'", shown));
    }
    return std::stoi(m[2]);
}

auto extractCodeBlocks(std::string_view text) -> std::vector<CodeBlock>
{
    std::vector<CodeBlock> blocks;
    std::istringstream in { std::string(text) };
    std::string line;
    std::optional<CodeBlock> open;
    while (std::getline(in, line))
    {
        auto const start = line.find_first_not_of(" \t");
        bool const fence = start != std::string::npos && line.compare(start, 3, "```") == 0;
        if (!open)
        {
            if (!fence)
                continue;
            auto info = line.substr(start + 3);
            std::erase_if(info, [](unsigned char c) { return std::isspace(c); });
            std::ranges::transform(info, info.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            open = CodeBlock { info, {} };
            continue;
        }
        if (fence)
        {
            if (open->language.empty() || open->language == "python" || open->language == "py")
            {
                if (open->code.find_first_not_of(" \t\r\n") != std::string::npos)
                    blocks.push_back(std::move(*open));
            }
            open.reset();
            continue;
        }
        open->code += line;
        open->code += '\n';
    }
    if (open && (open->language.empty() || open->language == "python" || open->language == "py")
        && open->code.find_first_not_of(" \t\r\n") != std::string::npos)
        blocks.push_back(std::move(*open));
    return blocks;
}

// Prompt

namespace
{
    constexpr std::string_view kTaskFraming =
        "You are resolving a referring expression in a 3D scene. The scene is described as a list of detected "
        "objects. Each line gives the object category, its id, the center ctr=[x,y,z] and full extents "
        "size=[sx,sy,sz] of its axis-aligned bounding box in meters, and its mean color rgb=[r,g,b]. The z axis "
        "points up. Find the single object that the description refers to.\n"
        "\n"
        "Whenever a quantitative evaluation is needed, write Python code in a fenced ```python block. Every block is "
        "executed and its printed output is sent back to you; definitions persist between blocks. If the code fails "
        "you receive the error and should fix the code. The relevant objects are preloaded in the dict OBJECTS "
        "(id -> {\"id\", \"category\", \"center\", \"size\", \"rgb\"}) together with SCENE_CENTER and the helper "
        "functions iou3d, rgb_to_hsl, color_distance, distance, point_plane_distance, left_right_of, "
        "default_observer, betweenness, wall_face_distance, corner_score, get_object and objects_of.\n"
        "\n"
        "When your reasoning is complete, end your reply with exactly:\n"
        "Now the answer is complete -- {'ID': <object id>}";
} // namespace

auto buildPrompt(std::string_view sceneText, std::string_view utterance, PromptMode mode,
                 Principles const& principles) -> std::vector<ChatTurn>
{
    if (utterance.find_first_not_of(" \t\r\n") == std::string_view::npos)
        throw DomainError("utterance is empty");
    std::string system(kTaskFraming);
    if (mode == PromptMode::Principles && !principles.sentences().empty())
    {
        system += fmt::format("\n\n{}\n", kPrinciplesHeader);
        for (auto const& s: principles.sentences())
            system += fmt::format("- {}\n", s);
        system.pop_back();
    }
    auto user = fmt::format("{}\nDescription: {}", sceneText, utterance);
    return { ChatTurn { Role::System, std::move(system) }, ChatTurn { Role::User, std::move(user) } };
}

// Trace

auto toString(Outcome outcome) -> char const*
{
    switch (outcome)
    {
        case Outcome::Answered: return "answered";
        case Outcome::MaxRounds: return "max_rounds";
        case Outcome::Aborted: return "aborted";
    }
    return "aborted";
}

auto outcomeFromString(std::string_view name) -> Outcome
{
    if (name == "answered")
        return Outcome::Answered;
    if (name == "max_rounds")
        return Outcome::MaxRounds;
    if (name == "aborted")
        return Outcome::Aborted;
    throw ParseError(fmt::format("unknown outcome '{}'", name));
}

auto traceToJson(ReasoningTrace const& trace) -> std::string
{
    nlohmann::ordered_json doc;
    doc["task_id"] = trace.taskId;
    doc["model"] = trace.model;
    doc["outcome"] = toString(trace.outcome);
    doc["answer"] = trace.answer ? json(*trace.answer) : json(nullptr);
    doc["rounds_used"] = trace.roundsUsed;
    doc["usage"] = { { "prompt_tokens", trace.usage.prompt }, { "completion_tokens", trace.usage.completion } };
    if (trace.abortCause)
        doc["abort_cause"] = *trace.abortCause;
    auto turns = nlohmann::ordered_json::array();
    for (auto const& t: trace.turns)
    {
        nlohmann::ordered_json turn;
        turn["role"] = toString(t.role);
        turn["content"] = t.content;
        turns.push_back(std::move(turn));
    }
    doc["turns"] = std::move(turns);
    return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

auto traceFromJson(std::string_view line) -> ReasoningTrace
{
    auto const doc = detail::parseJson(line, "trace");
    ReasoningTrace trace;
    trace.taskId = detail::asString(detail::field(doc, "task_id", "$"), "$.task_id");
    trace.model = doc.value("model", std::string {});
    trace.outcome = outcomeFromString(detail::asString(detail::field(doc, "outcome", "$"), "$.outcome"));
    if (auto const& a = detail::field(doc, "answer", "$"); !a.is_null())
        trace.answer = detail::asInt(a, "$.answer");
    trace.roundsUsed = detail::asInt(detail::field(doc, "rounds_used", "$"), "$.rounds_used");
    if (auto it = doc.find("usage"); it != doc.end())
    {
        trace.usage.prompt = it->value("prompt_tokens", std::int64_t { 0 });
        trace.usage.completion = it->value("completion_tokens", std::int64_t { 0 });
    }
    if (auto it = doc.find("abort_cause"); it != doc.end())
        trace.abortCause = detail::asString(*it, "$.abort_cause");
    auto const& turns = detail::field(doc, "turns", "$");
    if (!turns.is_array())
        throw ParseError("$.turns: expected an array");
    for (std::size_t i = 0; i < turns.size(); ++i)
    {
        auto const path = fmt::format("$.turns[{}]", i);
        trace.turns.push_back(
            { roleFromString(detail::asString(detail::field(turns[i], "role", path), path + ".role")),
              detail::asString(detail::field(turns[i], "content", path), path + ".content") });
    }
    return trace;
}

// Loop

namespace
{
    auto toolTurn(ExecResult const& result) -> ChatTurn
    {
        if (result.status == ExecStatus::Ok)
        {
            auto body = result.stdoutText.empty() ? std::string("(no output)") : result.stdoutText;
            return { Role::Tool, fmt::format("{}{}", kToolOkPrefix, body) };
        }
        auto body = result.stderrText;
        if (!result.stdoutText.empty())
            body = fmt::format("{}\n{}", result.stdoutText, body);
        if (body.empty())
            body = toString(result.status);
        return { Role::Tool, fmt::format("{}{}", kToolErrorPrefix, body) };
    }
} // namespace

auto runLoop(std::vector<ChatTurn> prompt, LlmClient& llm, Sandbox& sandbox, std::string const& sessionId,
             LoopConfig const& config) -> ReasoningTrace
{
    if (config.maxRounds < 1)
        throw DomainError("max_rounds must be at least 1");

    ReasoningTrace trace;
    trace.turns = std::move(prompt);
    trace.model = llm.identity();
    trace.outcome = Outcome::MaxRounds;

    for (int round = 1; round <= config.maxRounds; ++round)
    {
        LlmReply reply;
        try
        {
            reply = completeWithRetry(llm, trace.turns, config.retry);
        }
        catch (TransportError const& e)
        {
            trace.outcome = Outcome::Aborted;
            trace.abortCause = e.what();
            return trace;
        }
        trace.roundsUsed = round;
        trace.usage += reply.usage;
        trace.turns.push_back({ Role::Assistant, reply.text.empty() ? std::string("(empty response)") : reply.text });

        auto const blocks = extractCodeBlocks(reply.text);
        if (!blocks.empty())
        {
            for (auto const& block: blocks)
            {
                ExecResult result;
                try
                {
                    result = sandbox.execute({ sessionId, block.code, config.execTimeoutSeconds, false });
                }
                catch (Error const& e)
                {
                    result.status = ExecStatus::Error;
                    result.stderrText = e.what();
                }
                trace.turns.push_back(toolTurn(result));
            }
            continue;
        }

        std::optional<ObjectId> answer;
        try
        {
            answer = extractAnswer(reply.text);
        }
        catch (ParseError const&)
        {
            trace.turns.push_back({ Role::User, std::string(kReformatPrompt) });
            continue;
        }
        if (answer)
        {
            trace.answer = answer;
            trace.outcome = Outcome::Answered;
            return trace;
        }
        trace.turns.push_back({ Role::User, std::string(kContinuePrompt) });
    }
    return trace;
}

// Ground

auto toString(Protocol protocol) -> char const*
{
    return protocol == Protocol::ScanRefer ? "scanrefer" : "referit3d";
}

auto protocolFromString(std::string_view name) -> Protocol
{
    if (name == "referit3d")
        return Protocol::ReferIt3D;
    if (name == "scanrefer")
        return Protocol::ScanRefer;
    throw DomainError(fmt::format("unknown protocol '{}'", name));
}

auto ground(GroundingTask const& task, SceneTranscript const& scene, LlmClient& llm, Sandbox& sandbox,
            GroundConfig const& config) -> GroundingResult
{
    if (task.sceneId != scene.sceneId)
        throw DomainError(fmt::format("task {} refers to scene {}, got scene {}", task.taskId, task.sceneId,
                                      scene.sceneId));
    static Lexicon const emptyLexicon;
    auto const& lexicon = config.lexicon ? *config.lexicon : emptyLexicon;
    auto const& principles = config.principles ? *config.principles : Principles::builtin();

    GroundingResult result;
    result.filter = config.filter == FilterMethod::Llm ? filterLlm(scene, task.utterance, llm, lexicon)
                                                       : filterLexical(scene, task.utterance, lexicon);

    auto const sceneText = renderTranscript(scene, result.filter.keptIds);
    auto prompt = buildPrompt(sceneText, task.utterance, config.mode, principles);

    auto const sessionId = task.taskId;
    sandbox.preloadContext(sessionId, scene, result.filter.keptIds);
    result.trace = runLoop(std::move(prompt), llm, sandbox, sessionId, config.loop);
    sandbox.close(sessionId);
    result.trace.taskId = task.taskId;

    if (result.trace.outcome == Outcome::Answered)
    {
        result.objectId = result.trace.answer;
        if (config.protocol == Protocol::ScanRefer)
        {
            if (auto const* obj = scene.find(*result.objectId))
                result.box = obj->box();
        }
    }
    return result;
}

} // namespace refground
