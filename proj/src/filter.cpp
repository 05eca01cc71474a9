// SPDX-License-Identifier: Apache-2.0
#include "json_util.hpp"

#include <refground/error.hpp>
#include <refground/filter.hpp>
#include <refground/llm.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>

namespace refground
{

using detail::json;

namespace
{
    constexpr std::string_view kSpatialAnchors[] = { "corner", "room", "wall", "floor" };
    constexpr std::string_view kStructural[] = { "wall", "floor" };

    auto lower(std::string_view s) -> std::string
    {
        std::string out(s);
        std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return out;
    }

    auto endsWith(std::string_view s, std::string_view suffix) -> bool
    {
        return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
    }

    // Does utterance token `token` spell `word` or one of its regular plurals?
    auto matchesWord(std::string_view token, std::string_view word) -> bool
    {
        if (token == word)
            return true;
        if (token.size() <= word.size())
            return false;
        auto const tail = token.substr(word.size());
        if (token.substr(0, word.size()) == word && (tail == "s" || tail == "es"))
            return true;
        auto const stemIs = [&](std::string_view drop, std::string_view add) {
            if (!endsWith(word, drop))
                return false;
            auto const stem = word.substr(0, word.size() - drop.size());
            return token.size() == stem.size() + add.size() && token.substr(0, stem.size()) == stem
                   && token.substr(stem.size()) == add;
        };
        return stemIs("y", "ies") || stemIs("f", "ves") || stemIs("fe", "ves");
    }
} // namespace

Lexicon::Lexicon(std::map<std::string, std::vector<std::string>> entries)
{
    for (auto& [category, terms]: entries)
    {
        auto& dst = _entries[lower(category)];
        for (auto const& term: terms)
            dst.push_back(lower(term));
    }
}

auto Lexicon::fromJson(std::string_view text) -> Lexicon
{
    auto const doc = detail::parseJson(text, "lexicon");
    if (!doc.is_object())
        throw ParseError("lexicon: expected an object mapping category to synonyms");
    std::map<std::string, std::vector<std::string>> entries;
    for (auto const& [category, terms]: doc.items())
    {
        if (!terms.is_array())
            throw ParseError(fmt::format("lexicon.{}: expected a list of strings", category));
        auto& dst = entries[category];
        for (std::size_t i = 0; i < terms.size(); ++i)
            dst.push_back(detail::asString(terms[i], fmt::format("lexicon.{}[{}]", category, i)));
    }
    return Lexicon(std::move(entries));
}

auto Lexicon::load(std::filesystem::path const& path) -> Lexicon
{
    return fromJson(readFile(path));
}

auto Lexicon::termsFor(std::string const& category) const -> std::vector<std::string>
{
    std::vector<std::string> terms { lower(category) };
    if (auto it = _entries.find(terms.front()); it != _entries.end())
        terms.insert(terms.end(), it->second.begin(), it->second.end());
    return terms;
}

auto toString(FilterMethod method) -> char const*
{
    return method == FilterMethod::Llm ? "llm" : "lexical";
}

auto tokenize(std::string_view text) -> std::vector<std::string>
{
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c: text)
    {
        if (std::isalnum(c))
        {
            current.push_back(static_cast<char>(std::tolower(c)));
        }
        else if (!current.empty())
        {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty())
        tokens.push_back(std::move(current));
    return tokens;
}

auto containsTerm(std::vector<std::string> const& tokens, std::string_view term) -> bool
{
    auto const words = tokenize(term);
    if (words.empty() || words.size() > tokens.size())
        return false;
    for (std::size_t start = 0; start + words.size() <= tokens.size(); ++start)
    {
        bool all = true;
        for (std::size_t k = 0; k < words.size() && all; ++k)
            all = matchesWord(tokens[start + k], words[k]);
        if (all)
            return true;
    }
    return false;
}

auto filterLexical(SceneTranscript const& scene, std::string_view utterance, Lexicon const& lexicon) -> FilterResult
{
    auto const tokens = tokenize(utterance);
    FilterResult result;
    result.method = FilterMethod::Lexical;

    for (auto const& obj: scene.objects)
    {
        auto const terms = lexicon.termsFor(obj.category);
        if (std::ranges::any_of(terms, [&](auto const& t) { return containsTerm(tokens, t); }))
            result.keptIds.insert(obj.id);
    }

    if (result.keptIds.empty())
    {
        result.keptIds = scene.ids();
        result.rationale = "no lexical match";
        return result;
    }

    bool const spatial = std::ranges::any_of(kSpatialAnchors, [&](auto a) { return containsTerm(tokens, a); });
    if (spatial)
    {
        for (auto const& obj: scene.objects)
            if (std::ranges::find(kStructural, obj.category) != std::end(kStructural))
                result.keptIds.insert(obj.id);
    }
    return result;
}

auto buildFilterPrompt(SceneTranscript const& scene, std::string_view utterance) -> std::string
{
    std::string out = "The following objects were detected in a 3D scene (id: category):\n";
    for (auto const& obj: scene.objects)
        out += fmt::format("{}: {}\n", obj.id, obj.category);
    out += fmt::format("\nReferring expression: \"{}\"\n\n", utterance);
    out += "List every object that could be the referred object or that the expression uses as a reference "
           "(including synonyms and more general categories, and walls or floor for expressions about corners "
           "or the room). Reply with a JSON list of ids only, for example [3, 7, 12].";
    return out;
}

auto parseFilterReply(SceneTranscript const& scene, std::string_view reply) -> std::optional<IdSet>
{
    for (auto open = reply.find('['); open != std::string_view::npos; open = reply.find('[', open + 1))
    {
        auto const close = reply.find(']', open);
        if (close == std::string_view::npos)
            break;
        auto const doc = json::parse(reply.substr(open, close - open + 1), nullptr, false);
        if (doc.is_discarded() || !doc.is_array() || doc.empty())
            continue;
        IdSet ids;
        bool usable = true;
        for (auto const& item: doc)
        {
            if (item.is_number_integer())
            {
                ids.insert(item.get<int>());
            }
            else if (item.is_string())
            {
                auto const name = lower(item.get<std::string>());
                for (auto const& obj: scene.objects)
                    if (obj.category == name)
                        ids.insert(obj.id);
            }
            else
            {
                usable = false;
            }
        }
        if (usable)
            return ids;
    }
    return std::nullopt;
}

auto filterLlm(SceneTranscript const& scene, std::string_view utterance, LlmClient& llm, Lexicon const& lexicon)
    -> FilterResult
{
    auto fallback = [&](std::string cause) {
        auto result = filterLexical(scene, utterance, lexicon);
        result.rationale = result.rationale ? fmt::format("{}; {}", cause, *result.rationale) : cause;
        return result;
    };

    LlmReply reply;
    try
    {
        reply = llm.complete({ ChatTurn { Role::User, buildFilterPrompt(scene, utterance) } });
    }
    catch (TransportError const& e)
    {
        return fallback(fmt::format("llm filter unavailable: {}", e.what()));
    }

    auto const parsed = parseFilterReply(scene, reply.text);
    if (!parsed)
        return fallback("llm filter reply unparseable");

    FilterResult result;
    result.method = FilterMethod::Llm;
    for (auto id: *parsed)
        if (scene.find(id))
            result.keptIds.insert(id);
    if (result.keptIds.empty())
        return fallback("llm filter named no scene object");
    if (result.keptIds.size() != parsed->size())
        result.rationale = fmt::format("dropped {} ids not in scene", parsed->size() - result.keptIds.size());
    return result;
}

} // namespace refground
