// SPDX-License-Identifier: Apache-2.0
#include "json_util.hpp"

#include <refground/error.hpp>
#include <refground/selfcorrect.hpp>

#include <fmt/format.h>

#include <fstream>
#include <optional>

namespace refground
{

using detail::json;

auto collectRuns(std::vector<GroundingTask> const& tasks, std::map<std::string, SceneTranscript> const& scenes,
                 LlmFactory const& llmFor, Sandbox& sandbox, GroundConfig const& config, int jobs) -> RunPartition
{
    for (auto const& task: tasks)
    {
        if (!task.gtObjectId)
            throw DomainError(fmt::format("task {} has no gt_object_id", task.taskId));
        if (!scenes.contains(task.sceneId))
            throw DomainError(fmt::format("task {}: scene {} not loaded", task.taskId, task.sceneId));
    }

    std::vector<ReasoningTrace> traces(tasks.size());
    std::vector<std::optional<ObjectId>> predictions(tasks.size());
    parallelFor(tasks.size(), jobs, [&](std::size_t i) {
        auto const& task = tasks[i];
        auto llm = llmFor(task.taskId);
        auto result = ground(task, scenes.at(task.sceneId), *llm, sandbox, config);
        predictions[i] = result.objectId;
        traces[i] = std::move(result.trace);
    });

    RunPartition out;
    for (std::size_t i = 0; i < tasks.size(); ++i)
    {
        LabeledTrace item { std::move(traces[i]), *tasks[i].gtObjectId };
        if (predictions[i] && *predictions[i] == item.gtObjectId)
            out.correct.push_back(std::move(item));
        else
            out.incorrect.push_back(std::move(item));
    }
    return out;
}

auto correctionPrompt(ObjectId gtId) -> std::string
{
    return fmt::format("The correct answer is object {0}. Can you double check the information of object {0} and "
                       "the given prompt and see where you got wrong?",
                       gtId);
}

auto cleanDerivationPrompt(ObjectId gtId) -> std::string
{
    return fmt::format("Now write a clean reasoning process that arrives at object {} using only the scene "
                       "information and the description. Do not mention that the answer was provided or that an "
                       "earlier answer was wrong. End with: {}",
                       gtId, formatAnswer(gtId));
}

auto retryDerivationPrompt(ObjectId gtId) -> std::string
{
    return fmt::format("That reasoning does not end with object {}. {}", gtId, cleanDerivationPrompt(gtId));
}

auto elicitCorrection(ReasoningTrace const& trace, ObjectId gtId, LlmClient& llm, RetryPolicy const& retry)
    -> CorrectionResult
{
    if (trace.answer && *trace.answer == gtId)
        throw DomainError(fmt::format("task {} already answers {}; nothing to correct", trace.taskId, gtId));
    if (trace.turns.size() < 2)
        throw DomainError(fmt::format("task {}: trace has no prompt", trace.taskId));

    CorrectionResult result;
    auto conversation = trace.turns;
    try
    {
        conversation.push_back({ Role::User, correctionPrompt(gtId) });
        result.reflection = completeWithRetry(llm, conversation, retry).text;
        conversation.push_back({ Role::Assistant, result.reflection });

        conversation.push_back({ Role::User, cleanDerivationPrompt(gtId) });
        for (int attempt = 0; attempt <= kDerivationRetries; ++attempt)
        {
            if (attempt > 0)
                conversation.push_back({ Role::User, retryDerivationPrompt(gtId) });
            auto const reply = completeWithRetry(llm, conversation, retry);
            ++result.derivationAttempts;
            conversation.push_back({ Role::Assistant, reply.text });

            std::optional<ObjectId> answer;
            try
            {
                answer = extractAnswer(reply.text);
            }
            catch (ParseError const&)
            {
            }
            if (answer && *answer == gtId)
            {
                result.usable = true;
                result.clean.taskId = trace.taskId;
                result.clean.model = llm.identity();
                result.clean.turns = { trace.turns[0], trace.turns[1], { Role::Assistant, reply.text } };
                result.clean.roundsUsed = 1;
                result.clean.outcome = Outcome::Answered;
                result.clean.answer = gtId;
                return result;
            }
        }
        result.dropReason = fmt::format("no clean derivation of object {} after {} attempts", gtId,
                                        result.derivationAttempts);
    }
    catch (TransportError const& e)
    {
        result.dropReason = fmt::format("llm unavailable during correction: {}", e.what());
    }
    return result;
}

auto toString(RecordLabel label) -> char const*
{
    return label == RecordLabel::SelfCorrected ? "self_corrected" : "correct_first_try";
}

namespace
{
    auto labelFromString(std::string_view name) -> RecordLabel
    {
        if (name == "correct_first_try")
            return RecordLabel::CorrectFirstTry;
        if (name == "self_corrected")
            return RecordLabel::SelfCorrected;
        throw ParseError(fmt::format("unknown record label '{}'", name));
    }
} // namespace

auto toFinetuneRecord(LabeledTrace const& item, RecordLabel label, Principles const& principles) -> FinetuneRecord
{
    FinetuneRecord record;
    record.label = label;
    record.taskId = item.trace.taskId;
    for (auto const& turn: item.trace.turns)
    {
        switch (turn.role)
        {
            case Role::System: record.messages.push_back({ Role::System, principles.strip(turn.content) }); break;
            case Role::Tool:
                if (!record.messages.empty() && record.messages.back().role == Role::Assistant)
                    record.messages.back().content += "\n\n" + turn.content;
                else
                    record.messages.push_back({ Role::Assistant, turn.content });
                break;
            default: record.messages.push_back(turn); break;
        }
    }
    return record;
}

void validateRecord(FinetuneRecord const& record, ObjectId gtId, Principles const& principles)
{
    for (auto const& msg: record.messages)
    {
        if (auto hit = principles.findIn(msg.content))
            throw SchemaError(fmt::format("task {}: {} message contains principle sentence \"{}\"", record.taskId,
                                          toString(msg.role), *hit));
    }
    auto const last = std::find_if(record.messages.rbegin(), record.messages.rend(),
                                   [](ChatTurn const& t) { return t.role == Role::Assistant; });
    if (last == record.messages.rend())
        throw SchemaError(fmt::format("task {}: record has no assistant message", record.taskId));
    std::optional<ObjectId> answer;
    try
    {
        answer = extractAnswer(last->content);
    }
    catch (ParseError const&)
    {
    }
    if (!answer || *answer != gtId)
        throw SchemaError(fmt::format("task {}: final answer does not equal ground truth {}", record.taskId, gtId));
}

auto recordToJson(FinetuneRecord const& record) -> std::string
{
    nlohmann::ordered_json doc;
    auto messages = nlohmann::ordered_json::array();
    for (auto const& m: record.messages)
    {
        nlohmann::ordered_json msg;
        msg["role"] = toString(m.role);
        msg["content"] = m.content;
        messages.push_back(std::move(msg));
    }
    doc["messages"] = std::move(messages);
    doc["label"] = toString(record.label);
    doc["task_id"] = record.taskId;
    return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

auto recordFromJson(std::string_view line) -> FinetuneRecord
{
    auto const doc = detail::parseJson(line, "finetune record");
    FinetuneRecord record;
    auto const& messages = detail::field(doc, "messages", "$");
    if (!messages.is_array())
        throw ParseError("$.messages: expected an array");
    for (std::size_t i = 0; i < messages.size(); ++i)
    {
        auto const path = fmt::format("$.messages[{}]", i);
        record.messages.push_back(
            { roleFromString(detail::asString(detail::field(messages[i], "role", path), path + ".role")),
              detail::asString(detail::field(messages[i], "content", path), path + ".content") });
    }
    record.label = labelFromString(detail::asString(detail::field(doc, "label", "$"), "$.label"));
    record.taskId = detail::asString(detail::field(doc, "task_id", "$"), "$.task_id");
    return record;
}

auto readDataset(std::filesystem::path const& path) -> std::vector<FinetuneRecord>
{
    std::ifstream in(path);
    if (!in)
        throw Error(fmt::format("cannot open {}", path.string()));
    std::vector<FinetuneRecord> records;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty())
            records.push_back(recordFromJson(line));
    return records;
}

auto emitDataset(std::vector<LabeledTrace> const& correct, std::vector<LabeledTrace> const& corrected,
                 std::filesystem::path const& out, Principles const& principles) -> std::size_t
{
    std::vector<FinetuneRecord> records;
    auto add = [&](std::vector<LabeledTrace> const& items, RecordLabel label) {
        for (auto const& item: items)
        {
            auto record = toFinetuneRecord(item, label, principles);
            validateRecord(record, item.gtObjectId, principles);
            records.push_back(std::move(record));
        }
    };
    add(correct, RecordLabel::CorrectFirstTry);
    add(corrected, RecordLabel::SelfCorrected);

    std::ofstream file(out, std::ios::binary);
    if (!file)
        throw Error(fmt::format("cannot write {}", out.string()));
    for (auto const& record: records)
        file << recordToJson(record) << '\n';
    return records.size();
}

} // namespace refground
