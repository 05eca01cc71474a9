// SPDX-License-Identifier: Apache-2.0
// Scripted conversations exercising the three loop paths, and an executor double for them.
#pragma once

#include <refground/reasoning.hpp>
#include <refground/sandbox.hpp>

#include <string>
#include <vector>

namespace refground::scripts
{

inline std::string const kCornerCode = "```python\n"
                                       "walls = [(o['center'], o['size']) for o in objects_of('wall')]\n"
                                       "for c in objects_of('chair'):\n"
                                       "    print(c['id'], round(corner_score(c['center'], c['size'], walls), 2))\n"
                                       "```";

/// One code block, then the answer.
inline auto direct() -> std::vector<std::string>
{
    return { "Let me score the chairs.\n" + kCornerCode,
             "Chair 18 is closest to two walls and lies between the desks. Now the answer is complete -- {'ID':18}" };
}

/// Code that fails, a corrected version, then the answer.
inline auto buggyThenFixed() -> std::vector<std::string>
{
    return { "```python\nfor c in objects_of('chair'):\n    print(c['id'], corner_scor(c))\n```",
             "The helper name was misspelled.\n" + kCornerCode,
             "Now the answer is complete -- {'ID':18}" };
}

/// Talks forever without code or an answer.
inline auto neverAnswers(int rounds) -> std::vector<std::string>
{
    return std::vector<std::string>(static_cast<std::size_t>(rounds) + 5, "I need to think about this more.");
}

/// Executor double: snippets calling the misspelled helper fail, everything else prints fixed scores.
inline auto fakeExecutor() -> InterpreterFactory
{
    return fakeFactory([](std::string const& code, bool) {
        if (code.find("corner_scor(") != std::string::npos)
            return ExecResult { "", "NameError: name 'corner_scor' is not defined", ExecStatus::Error, 0.0 };
        if (code.find("OBJECTS = {") != std::string::npos)
            return ExecResult {};
        return ExecResult { "15 2.41\n18 0.84\n19 3.9\n49 1.37\n", "", ExecStatus::Ok, 0.0 };
    });
}

} // namespace refground::scripts
