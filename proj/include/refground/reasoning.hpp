// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <refground/filter.hpp>
#include <refground/llm.hpp>
#include <refground/sandbox.hpp>
#include <refground/scene.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace refground
{

enum class PromptMode
{
    Principles,
    NoPrinciples,
};

auto toString(PromptMode mode) -> char const*;
auto promptModeFromString(std::string_view name) -> PromptMode;

/// Spatial-reasoning guidance placed in the system prompt in principles mode, one sentence each.
class Principles
{
public:
    /// The built-in set: HSL color matching, vector-based direction, point-to-plane distance, and a
    /// few more.
    static auto builtin() -> Principles const&;
    /// One sentence per non-empty line.
    static auto load(std::filesystem::path const& path) -> Principles;

    explicit Principles(std::vector<std::string> sentences);

    [[nodiscard]] auto sentences() const -> std::vector<std::string> const& { return _sentences; }

    /// First sentence found in `text`, if any.
    [[nodiscard]] auto findIn(std::string_view text) const -> std::optional<std::string>;

    /// `text` with the principles header and every line carrying a principle sentence removed.
    [[nodiscard]] auto strip(std::string_view text) const -> std::string;

private:
    std::vector<std::string> _sentences;
};

inline constexpr std::string_view kPrinciplesHeader = "Guiding principles:";
inline constexpr std::string_view kCompletionMarker = "Now the answer is complete";

/// The answer sentence the model is told to end with: "Now the answer is complete -- {'ID':N}".
auto formatAnswer(ObjectId id) -> std::string;

/// Extracts N from the last completion marker followed by a mapping with key ID. Quotes may be
/// single or double and whitespace is free. nullopt without a marker; ParseError when the marker is
/// present but its payload is not an integer ID.
auto extractAnswer(std::string_view text) -> std::optional<ObjectId>;

struct CodeBlock
{
    std::string language;
    std::string code;
};

/// Fenced blocks whose info string is empty, "python" or "py", in order of appearance.
auto extractCodeBlocks(std::string_view text) -> std::vector<CodeBlock>;

/// System turn (task framing, code and answer contract, principles iff requested) and user turn
/// (scene transcript and utterance). Throws DomainError for an empty utterance.
auto buildPrompt(std::string_view sceneText, std::string_view utterance, PromptMode mode,
                 Principles const& principles = Principles::builtin()) -> std::vector<ChatTurn>;

enum class Outcome
{
    Answered,
    MaxRounds,
    Aborted,
};

auto toString(Outcome outcome) -> char const*;
auto outcomeFromString(std::string_view name) -> Outcome;

struct ReasoningTrace
{
    std::string taskId;
    std::vector<ChatTurn> turns;
    int roundsUsed = 0;
    Outcome outcome = Outcome::MaxRounds;
    std::optional<ObjectId> answer;
    TokenUsage usage;
    std::string model;
    std::optional<std::string> abortCause;

    friend auto operator==(ReasoningTrace const&, ReasoningTrace const&) -> bool = default;
};

auto traceToJson(ReasoningTrace const& trace) -> std::string;
auto traceFromJson(std::string_view line) -> ReasoningTrace;

struct LoopConfig
{
    int maxRounds = 10;
    double execTimeoutSeconds = 10.0;
    RetryPolicy retry;
};

/// User turn sent when a reply has neither code nor an answer.
inline constexpr std::string_view kContinuePrompt =
    "Continue. Either write Python code in a fenced ```python block to compute what you still need, or state the "
    "final answer in the required format.";

/// User turn sent when the completion marker is present but its payload is unusable.
inline constexpr std::string_view kReformatPrompt =
    "Your final answer could not be read. End your reply with exactly: Now the answer is complete -- {'ID': <object "
    "id as an integer>}";

/// Prefix of tool turns carrying execution output.
inline constexpr std::string_view kToolOkPrefix = "Code execution result:\n";
inline constexpr std::string_view kToolErrorPrefix = "Code execution failed. Fix the code and try again.\n";

/// Alternates LLM calls and sandbox execution until an answer is extracted or maxRounds LLM calls
/// have been made. Each fenced code block of a reply becomes one tool turn, in order.
auto runLoop(std::vector<ChatTurn> prompt, LlmClient& llm, Sandbox& sandbox, std::string const& sessionId,
             LoopConfig const& config) -> ReasoningTrace;

enum class Protocol
{
    ReferIt3D, ///< predict an object id
    ScanRefer, ///< predict a bounding box
};

auto toString(Protocol protocol) -> char const*;
auto protocolFromString(std::string_view name) -> Protocol;

struct GroundConfig
{
    PromptMode mode = PromptMode::Principles;
    LoopConfig loop;
    FilterMethod filter = FilterMethod::Lexical;
    Protocol protocol = Protocol::ReferIt3D;
    Lexicon const* lexicon = nullptr;
    Principles const* principles = nullptr;
};

struct GroundingResult
{
    std::optional<ObjectId> objectId;
    std::optional<Aabb> box;
    ReasoningTrace trace;
    FilterResult filter;
};

/// Filter, render, prompt, reason. In ScanRefer mode the predicted id is mapped to its box; a
/// prediction naming no scene object yields no box. Throws DomainError when scene and task
/// disagree on the scene id.
auto ground(GroundingTask const& task, SceneTranscript const& scene, LlmClient& llm, Sandbox& sandbox,
            GroundConfig const& config) -> GroundingResult;

} // namespace refground
