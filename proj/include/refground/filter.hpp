// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <refground/scene.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace refground
{

class LlmClient;

/// Category -> synonyms and hypernyms. Terms may be multi-word ("office chair").
class Lexicon
{
public:
    Lexicon() = default;
    explicit Lexicon(std::map<std::string, std::vector<std::string>> entries);

    static auto fromJson(std::string_view json) -> Lexicon;
    static auto load(std::filesystem::path const& path) -> Lexicon;

    /// The category itself followed by its lexicon terms.
    [[nodiscard]] auto termsFor(std::string const& category) const -> std::vector<std::string>;

    [[nodiscard]] auto entries() const -> std::map<std::string, std::vector<std::string>> const& { return _entries; }

private:
    std::map<std::string, std::vector<std::string>> _entries;
};

enum class FilterMethod
{
    Lexical,
    Llm,
};

auto toString(FilterMethod method) -> char const*;

struct FilterResult
{
    IdSet keptIds;
    FilterMethod method = FilterMethod::Lexical;
    std::optional<std::string> rationale;
};

/// Lowercased word tokens of `text`; every non-alphanumeric character separates tokens.
auto tokenize(std::string_view text) -> std::vector<std::string>;

/// True when the word sequence of `term` occurs contiguously in `tokens`, allowing plural
/// inflections ("desks", "boxes", "shelves") on the utterance side.
auto containsTerm(std::vector<std::string> const& tokens, std::string_view term) -> bool;

/// Keeps objects whose category or lexicon term appears in the utterance. Walls and floors are kept
/// whenever the utterance mentions a corner, room, wall or floor. With no category hit at all,
/// every object is kept.
auto filterLexical(SceneTranscript const& scene, std::string_view utterance, Lexicon const& lexicon) -> FilterResult;

/// Asks the LLM for relevant ids, intersected with the scene. Transport failures, unparseable
/// replies and replies with no valid id fall back to filterLexical with the cause in `rationale`.
auto filterLlm(SceneTranscript const& scene, std::string_view utterance, LlmClient& llm, Lexicon const& lexicon)
    -> FilterResult;

/// The prompt sent by filterLlm. Exposed for tests and trace inspection.
auto buildFilterPrompt(SceneTranscript const& scene, std::string_view utterance) -> std::string;

/// Parses a JSON list of ids and/or category names out of a reply. nullopt when nothing parses.
auto parseFilterReply(SceneTranscript const& scene, std::string_view reply) -> std::optional<IdSet>;

} // namespace refground
