// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace refground
{

enum class Role
{
    System,
    User,
    Assistant,
    Tool,
};

auto toString(Role role) -> char const*;
auto roleFromString(std::string_view name) -> Role;

struct ChatTurn
{
    Role role = Role::User;
    std::string content;

    friend auto operator==(ChatTurn const&, ChatTurn const&) -> bool = default;
};

struct TokenUsage
{
    std::int64_t prompt = 0;
    std::int64_t completion = 0;

    auto operator+=(TokenUsage const& other) -> TokenUsage&
    {
        prompt += other.prompt;
        completion += other.completion;
        return *this;
    }

    friend auto operator==(TokenUsage const&, TokenUsage const&) -> bool = default;
};

struct LlmReply
{
    std::string text;
    TokenUsage usage;
};

/// Chat-completion backend. Implementations throw TransportError when no reply can be produced.
class LlmClient
{
public:
    virtual ~LlmClient() = default;

    virtual auto complete(std::vector<ChatTurn> const& turns) -> LlmReply = 0;
    [[nodiscard]] virtual auto identity() const -> std::string = 0;
};

/// Replays a fixed list of assistant responses in order. Running out is a TransportError.
class ScriptedLlm final: public LlmClient
{
public:
    explicit ScriptedLlm(std::vector<std::string> responses, std::string name = "scripted");

    auto complete(std::vector<ChatTurn> const& turns) -> LlmReply override;
    [[nodiscard]] auto identity() const -> std::string override { return _name; }

    [[nodiscard]] auto callCount() const -> std::size_t;

private:
    mutable std::mutex _mutex;
    std::vector<std::string> _responses;
    std::size_t _cursor = 0;
    std::string _name;
};

/// A scripted fixture file: either a JSON list of responses shared by every task, or an object
/// mapping task ids to their own response lists.
class ScriptedBackend
{
public:
    static auto fromJson(std::string_view json) -> ScriptedBackend;
    static auto load(std::filesystem::path const& path) -> ScriptedBackend;

    /// Client for `taskId`. Each per-task script has one client whose cursor persists across calls,
    /// so follow-up conversations (self-correction) continue where grounding stopped. A shared list
    /// is consumed by every task through a single client. Tasks without a script get an empty one.
    auto clientFor(std::string const& taskId) const -> std::shared_ptr<LlmClient>;

private:
    std::shared_ptr<ScriptedLlm> _shared;
    std::map<std::string, std::shared_ptr<ScriptedLlm>> _perTask;
};

/// Minimum spacing between requests, shared by every client holding the limiter.
class RateLimiter
{
public:
    explicit RateLimiter(double requestsPerSecond);
    void acquire();

private:
    std::mutex _mutex;
    std::chrono::steady_clock::duration _interval;
    std::chrono::steady_clock::time_point _next;
};

struct HttpLlmConfig
{
    std::string baseUrl = "https://api.openai.com/v1";
    std::string model = "gpt-4";
    std::string apiKeyEnv = "OPENAI_API_KEY";
    double temperature = 0.0;
    std::chrono::seconds timeout { 120 };
};

/// OpenAI-style chat-completions client (POST {baseUrl}/chat/completions).
class HttpLlm final: public LlmClient
{
public:
    explicit HttpLlm(HttpLlmConfig config, std::shared_ptr<RateLimiter> limiter = nullptr);

    auto complete(std::vector<ChatTurn> const& turns) -> LlmReply override;
    [[nodiscard]] auto identity() const -> std::string override { return _config.model; }

    /// Request body for `turns`. Tool turns are sent as user messages.
    [[nodiscard]] auto requestBody(std::vector<ChatTurn> const& turns) const -> std::string;
    static auto parseResponse(std::string_view body) -> LlmReply;

private:
    HttpLlmConfig _config;
    std::string _apiKey;
    std::shared_ptr<RateLimiter> _limiter;
};

struct RetryPolicy
{
    int attempts = 3;
    std::chrono::milliseconds initialBackoff { 1000 };
};

/// complete() with exponential backoff between failed attempts; rethrows the last TransportError.
auto completeWithRetry(LlmClient& llm, std::vector<ChatTurn> const& turns, RetryPolicy const& policy) -> LlmReply;

} // namespace refground
