// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <refground/scene.hpp>

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace refground
{

enum class ExecStatus
{
    Ok,
    Error,
    Timeout,
};

auto toString(ExecStatus status) -> char const*;
auto execStatusFromString(std::string_view name) -> ExecStatus;

struct ExecRequest
{
    std::string sessionId;
    std::string code;
    double timeoutSeconds = 10.0;
    bool reset = false;
};

struct ExecResult
{
    std::string stdoutText;
    std::string stderrText;
    ExecStatus status = ExecStatus::Ok;
    double wallTime = 0.0;
};

inline constexpr std::size_t kOutputLimit = 4096;
inline constexpr double kMaxTimeoutSeconds = 60.0;
inline constexpr std::string_view kTruncationMarker = "\n...[output truncated]";

/// Cuts `text` to `limit` characters and appends the truncation marker when it was longer.
auto truncateOutput(std::string text, std::size_t limit = kOutputLimit) -> std::string;

/// One line of the shim wire protocol.
auto encodeShimRequest(std::string_view id, std::string_view code, bool reset) -> std::string;

struct ShimResponse
{
    std::string id;
    std::string stdoutText;
    std::string stderrText;
    ExecStatus status = ExecStatus::Ok;
};

/// Throws ParseError for lines that are not a protocol response.
auto decodeShimResponse(std::string_view line) -> ShimResponse;

/// Executes snippets for a single session. Not thread-safe; Sandbox serializes access.
class Interpreter
{
public:
    virtual ~Interpreter() = default;

    virtual auto run(std::string const& requestId, std::string const& code, bool reset,
                     std::chrono::duration<double> timeout) -> ExecResult = 0;
};

/// Runs the interpreter shim as a child process and talks to it over stdin/stdout.
///
/// The process is spawned on first use. A timed-out snippet kills the process; the next request
/// starts a fresh one with an empty namespace.
class ShimInterpreter final: public Interpreter
{
public:
    explicit ShimInterpreter(std::vector<std::string> command);
    ~ShimInterpreter() override;

    ShimInterpreter(ShimInterpreter const&) = delete;
    auto operator=(ShimInterpreter const&) -> ShimInterpreter& = delete;

    auto run(std::string const& requestId, std::string const& code, bool reset,
             std::chrono::duration<double> timeout) -> ExecResult override;

    /// Sends one raw line and waits for one response line; nullopt (and a killed process) on timeout.
    auto exchangeRaw(std::string const& line, std::chrono::duration<double> timeout) -> std::optional<std::string>;

    [[nodiscard]] auto running() const -> bool { return _pid > 0; }
    [[nodiscard]] auto restarts() const -> int { return _restarts; }

private:
    void start();
    void stop();
    auto readLine(std::chrono::steady_clock::time_point deadline) -> std::optional<std::string>;

    std::vector<std::string> _command;
    int _pid = -1;
    int _toChild = -1;
    int _fromChild = -1;
    std::string _buffer;
    int _restarts = 0;
    bool _everStarted = false;
};

/// In-process stand-in used when no shim is available. The handler sees each snippet and
/// decides the result; the default handler answers every snippet with an empty ok result.
class FakeInterpreter final: public Interpreter
{
public:
    using Handler = std::function<ExecResult(std::string const& code, bool reset)>;

    FakeInterpreter();
    explicit FakeInterpreter(Handler handler);

    auto run(std::string const& requestId, std::string const& code, bool reset,
             std::chrono::duration<double> timeout) -> ExecResult override;

    [[nodiscard]] auto history() const -> std::vector<std::string> const& { return _history; }

private:
    Handler _handler;
    std::vector<std::string> _history;
};

using InterpreterFactory = std::function<std::unique_ptr<Interpreter>()>;

auto shimFactory(std::vector<std::string> command) -> InterpreterFactory;
auto fakeFactory(FakeInterpreter::Handler handler = {}) -> InterpreterFactory;

/// Owns one interpreter per session id. Calls for the same session are serialized; distinct
/// sessions run concurrently.
class Sandbox
{
public:
    explicit Sandbox(InterpreterFactory factory, std::size_t outputLimit = kOutputLimit);

    /// Throws DomainError on an invalid request (empty code without reset, timeout outside (0, 60]).
    auto execute(ExecRequest const& request) -> ExecResult;

    /// Injects the `OBJECTS` table for `keptIds` and the geometry helpers into the session.
    auto preloadContext(std::string const& sessionId, SceneTranscript const& scene, IdSet const& keptIds)
        -> ExecResult;

    /// Drops the session and its interpreter.
    void close(std::string const& sessionId);

private:
    struct Session
    {
        std::mutex mutex;
        std::unique_ptr<Interpreter> interpreter;
        std::uint64_t counter = 0;
    };

    auto session(std::string const& id) -> std::shared_ptr<Session>;

    InterpreterFactory _factory;
    std::size_t _outputLimit;
    std::mutex _mutex;
    std::map<std::string, std::shared_ptr<Session>> _sessions;
};

/// Python source defining the helper namespace available to generated code.
auto helperSource() -> std::string_view;

/// Python source for the preload snippet (object table plus helpers).
auto preloadSource(SceneTranscript const& scene, IdSet const& keptIds) -> std::string;

} // namespace refground
