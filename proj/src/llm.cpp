// SPDX-License-Identifier: Apache-2.0
#include "json_util.hpp"

#include <refground/error.hpp>
#include <refground/llm.hpp>
#include <refground/scene.hpp>

#include <fmt/format.h>
#include <httplib.h>

#include <cstdlib>
#include <thread>

namespace refground
{

using detail::json;

auto toString(Role role) -> char const*
{
    switch (role)
    {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
        case Role::Tool: return "tool";
    }
    return "user";
}

auto roleFromString(std::string_view name) -> Role
{
    if (name == "system")
        return Role::System;
    if (name == "user")
        return Role::User;
    if (name == "assistant")
        return Role::Assistant;
    if (name == "tool")
        return Role::Tool;
    throw ParseError(fmt::format("unknown chat role '{}'", name));
}

ScriptedLlm::ScriptedLlm(std::vector<std::string> responses, std::string name):
    _responses(std::move(responses)), _name(std::move(name))
{
}

auto ScriptedLlm::complete(std::vector<ChatTurn> const& /*turns*/) -> LlmReply
{
    std::lock_guard lock(_mutex);
    if (_cursor >= _responses.size())
        throw TransportError(fmt::format("scripted backend exhausted after {} responses", _responses.size()));
    auto const& text = _responses[_cursor++];
    return { text, {} };
}

auto ScriptedLlm::callCount() const -> std::size_t
{
    std::lock_guard lock(_mutex);
    return _cursor;
}

namespace
{
    auto asResponses(json const& list, std::string_view path) -> std::vector<std::string>
    {
        if (!list.is_array())
            throw ParseError(fmt::format("{}: expected a list of responses", path));
        std::vector<std::string> out;
        for (std::size_t i = 0; i < list.size(); ++i)
            out.push_back(detail::asString(list[i], fmt::format("{}[{}]", path, i)));
        return out;
    }
} // namespace

auto ScriptedBackend::fromJson(std::string_view text) -> ScriptedBackend
{
    auto const doc = detail::parseJson(text, "script");
    ScriptedBackend backend;
    if (doc.is_array())
    {
        backend._shared = std::make_shared<ScriptedLlm>(asResponses(doc, "$"));
    }
    else if (doc.is_object())
    {
        for (auto const& [taskId, list]: doc.items())
            backend._perTask[taskId] = std::make_shared<ScriptedLlm>(asResponses(list, fmt::format("$.{}", taskId)));
    }
    else
    {
        throw ParseError("script: expected a list or an object of lists");
    }
    return backend;
}

auto ScriptedBackend::load(std::filesystem::path const& path) -> ScriptedBackend
{
    return fromJson(readFile(path));
}

auto ScriptedBackend::clientFor(std::string const& taskId) const -> std::shared_ptr<LlmClient>
{
    if (_shared)
        return _shared;
    auto it = _perTask.find(taskId);
    if (it == _perTask.end())
        return std::make_shared<ScriptedLlm>(std::vector<std::string> {});
    return it->second;
}

RateLimiter::RateLimiter(double requestsPerSecond):
    _interval(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(requestsPerSecond > 0 ? 1.0 / requestsPerSecond : 0.0))),
    _next(std::chrono::steady_clock::now())
{
}

void RateLimiter::acquire()
{
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(_mutex);
        auto const now = std::chrono::steady_clock::now();
        slot = std::max(now, _next);
        _next = slot + _interval;
    }
    std::this_thread::sleep_until(slot);
}

HttpLlm::HttpLlm(HttpLlmConfig config, std::shared_ptr<RateLimiter> limiter):
    _config(std::move(config)), _limiter(std::move(limiter))
{
    if (auto const* key = std::getenv(_config.apiKeyEnv.c_str()))
        _apiKey = key;
}

auto HttpLlm::requestBody(std::vector<ChatTurn> const& turns) const -> std::string
{
    auto messages = json::array();
    for (auto const& turn: turns)
    {
        auto const role = turn.role == Role::Tool ? Role::User : turn.role;
        messages.push_back(json { { "role", toString(role) }, { "content", turn.content } });
    }
    json body { { "model", _config.model }, { "temperature", _config.temperature }, { "messages", messages } };
    return body.dump();
}

auto HttpLlm::parseResponse(std::string_view body) -> LlmReply
{
    json doc;
    try
    {
        doc = json::parse(body);
    }
    catch (json::parse_error const& e)
    {
        throw TransportError(fmt::format("chat response is not JSON: {}", e.what()));
    }
    LlmReply reply;
    try
    {
        reply.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
    }
    catch (json::exception const& e)
    {
        throw TransportError(fmt::format("chat response lacks choices[0].message.content: {}", e.what()));
    }
    if (auto it = doc.find("usage"); it != doc.end() && it->is_object())
    {
        reply.usage.prompt = it->value("prompt_tokens", std::int64_t { 0 });
        reply.usage.completion = it->value("completion_tokens", std::int64_t { 0 });
    }
    return reply;
}

auto HttpLlm::complete(std::vector<ChatTurn> const& turns) -> LlmReply
{
    auto const schemeEnd = _config.baseUrl.find("://");
    auto const pathStart = _config.baseUrl.find('/', schemeEnd == std::string::npos ? 0 : schemeEnd + 3);
    auto const hostPart = _config.baseUrl.substr(0, pathStart);
    auto const prefix = pathStart == std::string::npos ? std::string {} : _config.baseUrl.substr(pathStart);

    if (_limiter)
        _limiter->acquire();

    httplib::Client client(hostPart);
    client.set_connection_timeout(_config.timeout);
    client.set_read_timeout(_config.timeout);
    httplib::Headers headers;
    if (!_apiKey.empty())
        headers.emplace("Authorization", "Bearer " + _apiKey);

    auto result = client.Post(prefix + "/chat/completions", headers, requestBody(turns), "application/json");
    if (!result)
        throw TransportError(fmt::format("POST {}: {}", _config.baseUrl, httplib::to_string(result.error())));
    if (result->status != 200)
        throw TransportError(fmt::format("POST {}: HTTP {}: {}", _config.baseUrl, result->status, result->body));
    return parseResponse(result->body);
}

auto completeWithRetry(LlmClient& llm, std::vector<ChatTurn> const& turns, RetryPolicy const& policy) -> LlmReply
{
    auto backoff = policy.initialBackoff;
    for (int attempt = 1;; ++attempt)
    {
        try
        {
            return llm.complete(turns);
        }
        catch (TransportError const&)
        {
            if (attempt >= policy.attempts)
                throw;
        }
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
    }
}

} // namespace refground
