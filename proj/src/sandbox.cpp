// SPDX-License-Identifier: Apache-2.0
#include "json_util.hpp"

#include <refground/error.hpp>
#include <refground/sandbox.hpp>

#include <fmt/format.h>

#include <cerrno>
#include <cstring>
#include <csignal>
#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

namespace refground
{

using detail::json;
using Clock = std::chrono::steady_clock;

auto toString(ExecStatus status) -> char const*
{
    switch (status)
    {
        case ExecStatus::Ok: return "ok";
        case ExecStatus::Error: return "error";
        case ExecStatus::Timeout: return "timeout";
    }
    return "error";
}

auto execStatusFromString(std::string_view name) -> ExecStatus
{
    if (name == "ok")
        return ExecStatus::Ok;
    if (name == "error")
        return ExecStatus::Error;
    if (name == "timeout")
        return ExecStatus::Timeout;
    throw ParseError(fmt::format("unknown exec status '{}'", name));
}

auto truncateOutput(std::string text, std::size_t limit) -> std::string
{
    if (text.size() <= limit)
        return text;
    text.resize(limit);
    text += kTruncationMarker;
    return text;
}

auto encodeShimRequest(std::string_view id, std::string_view code, bool reset) -> std::string
{
    nlohmann::ordered_json doc;
    doc["id"] = id;
    doc["code"] = code;
    doc["reset"] = reset;
    return doc.dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}

auto decodeShimResponse(std::string_view line) -> ShimResponse
{
    auto const doc = detail::parseJson(line, "shim response");
    ShimResponse r;
    r.id = detail::asString(detail::field(doc, "id", "$"), "$.id");
    r.stdoutText = detail::asString(detail::field(doc, "stdout", "$"), "$.stdout");
    r.stderrText = detail::asString(detail::field(doc, "stderr", "$"), "$.stderr");
    r.status = execStatusFromString(detail::asString(detail::field(doc, "status", "$"), "$.status"));
    return r;
}

// ShimInterpreter

ShimInterpreter::ShimInterpreter(std::vector<std::string> command): _command(std::move(command))
{
    if (_command.empty())
        throw DomainError("shim command is empty");
}

ShimInterpreter::~ShimInterpreter()
{
    stop();
}

void ShimInterpreter::start()
{
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
        throw Error(fmt::format("socketpair: {}", std::strerror(errno)));

    std::vector<char*> argv;
    for (auto& arg: _command)
        argv.push_back(arg.data());
    argv.push_back(nullptr);

    auto const pid = ::fork();
    if (pid < 0)
    {
        ::close(fds[0]);
        ::close(fds[1]);
        throw Error(fmt::format("fork: {}", std::strerror(errno)));
    }
    if (pid == 0)
    {
        ::dup2(fds[1], STDIN_FILENO);
        ::dup2(fds[1], STDOUT_FILENO);
        auto const devnull = ::open("/dev/null", O_WRONLY);
        if (devnull >= 0)
            ::dup2(devnull, STDERR_FILENO);
        ::execvp(argv[0], argv.data());
        ::_exit(127);
    }
    ::close(fds[1]);
    _pid = pid;
    _toChild = fds[0];
    _fromChild = fds[0];
    _buffer.clear();
    if (_everStarted)
        ++_restarts;
    _everStarted = true;
}

void ShimInterpreter::stop()
{
    if (_toChild >= 0)
        ::close(_toChild);
    _toChild = _fromChild = -1;
    if (_pid > 0)
    {
        ::kill(_pid, SIGKILL);
        ::waitpid(_pid, nullptr, 0);
    }
    _pid = -1;
    _buffer.clear();
}

auto ShimInterpreter::readLine(Clock::time_point deadline) -> std::optional<std::string>
{
    for (;;)
    {
        if (auto const nl = _buffer.find('\n'); nl != std::string::npos)
        {
            auto line = _buffer.substr(0, nl);
            _buffer.erase(0, nl + 1);
            return line;
        }
        auto const left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
        if (left <= 0)
            return std::nullopt;
        pollfd pfd { _fromChild, POLLIN, 0 };
        auto const rc = ::poll(&pfd, 1, static_cast<int>(left));
        if (rc < 0 && errno == EINTR)
            continue;
        if (rc <= 0)
            return std::nullopt;
        char chunk[65536];
        auto const n = ::read(_fromChild, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            throw Error("interpreter exited unexpectedly");
        _buffer.append(chunk, static_cast<std::size_t>(n));
    }
}

auto ShimInterpreter::exchangeRaw(std::string const& line, std::chrono::duration<double> timeout)
    -> std::optional<std::string>
{
    if (_pid <= 0)
        start();
    auto const deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(timeout);
    std::string_view pending = line;
    while (!pending.empty())
    {
        auto const n = ::send(_toChild, pending.data(), pending.size(), MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR)
            continue;
        if (n < 0)
        {
            stop();
            throw Error(fmt::format("interpreter write failed: {}", std::strerror(errno)));
        }
        pending.remove_prefix(static_cast<std::size_t>(n));
    }
    std::optional<std::string> reply;
    try
    {
        reply = readLine(deadline);
    }
    catch (Error const&)
    {
        stop();
        throw;
    }
    if (!reply)
        stop();
    return reply;
}

auto ShimInterpreter::run(std::string const& requestId, std::string const& code, bool reset,
                          std::chrono::duration<double> timeout) -> ExecResult
{
    auto const started = Clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - started).count(); };
    ExecResult result;
    try
    {
        auto const line = exchangeRaw(encodeShimRequest(requestId, code, reset), timeout);
        if (!line)
        {
            result.status = ExecStatus::Timeout;
            result.stderrText = fmt::format(
                "execution timed out after {:g} s; interpreter restarted, session state was lost", timeout.count());
            result.wallTime = elapsed();
            return result;
        }
        auto const response = decodeShimResponse(*line);
        if (response.id != requestId)
        {
            stop();
            throw Error(fmt::format("protocol error: response id '{}' does not match request '{}'", response.id,
                                    requestId));
        }
        result.stdoutText = response.stdoutText;
        result.stderrText = response.stderrText;
        result.status = response.status;
    }
    catch (Error const& e)
    {
        stop();
        result.status = ExecStatus::Error;
        result.stderrText = fmt::format("{}; interpreter will be restarted, session state was lost", e.what());
    }
    result.wallTime = elapsed();
    return result;
}

// FakeInterpreter

FakeInterpreter::FakeInterpreter():
    FakeInterpreter([](std::string const&, bool) { return ExecResult {}; })
{
}

FakeInterpreter::FakeInterpreter(Handler handler): _handler(std::move(handler))
{
}

auto FakeInterpreter::run(std::string const& /*requestId*/, std::string const& code, bool reset,
                          std::chrono::duration<double> /*timeout*/) -> ExecResult
{
    if (reset)
        _history.clear();
    if (!code.empty())
        _history.push_back(code);
    return _handler(code, reset);
}

auto shimFactory(std::vector<std::string> command) -> InterpreterFactory
{
    return [command = std::move(command)] { return std::make_unique<ShimInterpreter>(command); };
}

auto fakeFactory(FakeInterpreter::Handler handler) -> InterpreterFactory
{
    return [handler = std::move(handler)]() -> std::unique_ptr<Interpreter> {
        if (handler)
            return std::make_unique<FakeInterpreter>(handler);
        return std::make_unique<FakeInterpreter>();
    };
}

// Sandbox

Sandbox::Sandbox(InterpreterFactory factory, std::size_t outputLimit):
    _factory(std::move(factory)), _outputLimit(outputLimit)
{
}

auto Sandbox::session(std::string const& id) -> std::shared_ptr<Session>
{
    std::lock_guard lock(_mutex);
    auto& slot = _sessions[id];
    if (!slot)
        slot = std::make_shared<Session>();
    return slot;
}

void Sandbox::close(std::string const& sessionId)
{
    std::shared_ptr<Session> victim;
    {
        std::lock_guard lock(_mutex);
        if (auto it = _sessions.find(sessionId); it != _sessions.end())
        {
            victim = std::move(it->second);
            _sessions.erase(it);
        }
    }
    if (victim)
    {
        std::lock_guard lock(victim->mutex);
        victim->interpreter.reset();
    }
}

auto Sandbox::execute(ExecRequest const& request) -> ExecResult
{
    if (request.code.empty() && !request.reset)
        throw DomainError("exec request has empty code");
    if (!(request.timeoutSeconds > 0.0) || request.timeoutSeconds > kMaxTimeoutSeconds)
        throw DomainError(fmt::format("exec timeout must lie in (0, {}], got {}", kMaxTimeoutSeconds,
                                      request.timeoutSeconds));

    auto s = session(request.sessionId);
    std::lock_guard lock(s->mutex);
    if (!s->interpreter)
        s->interpreter = _factory();
    auto const requestId = fmt::format("{}-{}", request.sessionId, ++s->counter);
    auto result = s->interpreter->run(requestId, request.code, request.reset,
                                      std::chrono::duration<double>(request.timeoutSeconds));
    result.stdoutText = truncateOutput(std::move(result.stdoutText), _outputLimit);
    result.stderrText = truncateOutput(std::move(result.stderrText), _outputLimit);
    return result;
}

auto Sandbox::preloadContext(std::string const& sessionId, SceneTranscript const& scene, IdSet const& keptIds)
    -> ExecResult
{
    return execute({ sessionId, preloadSource(scene, keptIds), kMaxTimeoutSeconds, false });
}

} // namespace refground
