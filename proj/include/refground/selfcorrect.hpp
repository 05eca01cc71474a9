// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <refground/parallel.hpp>
#include <refground/reasoning.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace refground
{

using LlmFactory = std::function<std::shared_ptr<LlmClient>(std::string const& taskId)>;

struct LabeledTrace
{
    ReasoningTrace trace;
    ObjectId gtObjectId = 0;
};

struct RunPartition
{
    std::vector<LabeledTrace> correct;
    std::vector<LabeledTrace> incorrect;
};

/// Grounds every task (up to `jobs` at a time) and partitions by prediction == ground truth.
/// Unanswered tasks count as incorrect. Output keeps input order within each partition.
/// Throws DomainError naming the first task without gt_object_id or without a scene.
auto collectRuns(std::vector<GroundingTask> const& tasks, std::map<std::string, SceneTranscript> const& scenes,
                 LlmFactory const& llmFor, Sandbox& sandbox, GroundConfig const& config, int jobs = 1)
    -> RunPartition;

/// "The correct answer is object N. Can you double check ..."
auto correctionPrompt(ObjectId gtId) -> std::string;
auto cleanDerivationPrompt(ObjectId gtId) -> std::string;
auto retryDerivationPrompt(ObjectId gtId) -> std::string;

struct CorrectionResult
{
    bool usable = false;
    std::string reflection;
    /// Original prompt followed by one clean assistant derivation ending in the ground-truth answer.
    ReasoningTrace clean;
    int derivationAttempts = 0;
    std::string dropReason;
};

inline constexpr int kDerivationRetries = 2;

/// Asks the model what went wrong, then for a clean derivation of `gtId`, re-requesting up to
/// kDerivationRetries times. Throws DomainError if the trace already answers `gtId`.
auto elicitCorrection(ReasoningTrace const& trace, ObjectId gtId, LlmClient& llm, RetryPolicy const& retry = {})
    -> CorrectionResult;

enum class RecordLabel
{
    CorrectFirstTry,
    SelfCorrected,
};

auto toString(RecordLabel label) -> char const*;

struct FinetuneRecord
{
    std::vector<ChatTurn> messages;
    RecordLabel label = RecordLabel::CorrectFirstTry;
    std::string taskId;

    friend auto operator==(FinetuneRecord const&, FinetuneRecord const&) -> bool = default;
};

/// System turn stripped of principles; tool turns folded into the preceding assistant turn.
auto toFinetuneRecord(LabeledTrace const& item, RecordLabel label, Principles const& principles) -> FinetuneRecord;

/// Throws SchemaError naming the task when a message carries a principle sentence or the final
/// assistant answer differs from `gtId`.
void validateRecord(FinetuneRecord const& record, ObjectId gtId, Principles const& principles);

auto recordToJson(FinetuneRecord const& record) -> std::string;
auto recordFromJson(std::string_view line) -> FinetuneRecord;
auto readDataset(std::filesystem::path const& path) -> std::vector<FinetuneRecord>;

/// Writes correct then corrected records as JSONL and returns the record count.
auto emitDataset(std::vector<LabeledTrace> const& correct, std::vector<LabeledTrace> const& corrected,
                 std::filesystem::path const& out, Principles const& principles = Principles::builtin()) -> std::size_t;

} // namespace refground
