// SPDX-License-Identifier: Apache-2.0
#include "generators.hpp"

#include <refground/error.hpp>
#include <refground/filter.hpp>
#include <refground/llm.hpp>

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <set>

using namespace refground;

namespace
{

auto fixtureScene() -> SceneTranscript
{
    return loadDetections(std::filesystem::path(REFGROUND_FIXTURES) / "scenes" / "scene0592_00.json");
}

auto lexicon() -> Lexicon const&
{
    static auto const lex = Lexicon::load(REFGROUND_LEXICON);
    return lex;
}

class ThrowingLlm final: public LlmClient
{
public:
    auto complete(std::vector<ChatTurn> const&) -> LlmReply override { throw TransportError("offline"); }
    [[nodiscard]] auto identity() const -> std::string override { return "offline"; }
};

} // namespace

TEST_CASE("tokenize and plural matching")
{
    CHECK(tokenize("The Chair, next-to desks!") == std::vector<std::string> { "the", "chair", "next", "to", "desks" });
    auto const t = tokenize("two boxes, three shelves and some libraries near office chairs");
    CHECK(containsTerm(t, "box"));
    CHECK(containsTerm(t, "shelf"));
    CHECK(containsTerm(t, "library"));
    CHECK(containsTerm(t, "office chair"));
    CHECK_FALSE(containsTerm(t, "chairman"));
    CHECK_FALSE(containsTerm(t, "desk"));
    // no substring matches inside words
    CHECK_FALSE(containsTerm(tokenize("the bedside"), "bed"));
}

TEST_CASE("corner-chair utterance keeps the relevant categories")
{
    auto const scene = fixtureScene();
    auto const r = filterLexical(scene, "chair in the corner of the room, between white and yellow desks", lexicon());
    CHECK(r.method == FilterMethod::Lexical);
    CHECK_FALSE(r.rationale.has_value());
    for (auto const& obj: scene.objects)
    {
        bool const expected = obj.category == "chair" || obj.category == "armchair" || obj.category == "desk"
                              || obj.category == "wall" || obj.category == "floor";
        CHECK_MESSAGE(r.keptIds.contains(obj.id) == expected, obj.category, " id=", obj.id);
    }
}

TEST_CASE("walls are not added without a spatial anchor word")
{
    auto const scene = fixtureScene();
    auto const r = filterLexical(scene, "the yellow desk", lexicon());
    for (auto id: r.keptIds)
        CHECK(scene.find(id)->category == "desk");
}

TEST_CASE("no lexical hit keeps everything")
{
    auto const scene = fixtureScene();
    auto const r = filterLexical(scene, "the thing over there", lexicon());
    CHECK(r.keptIds == scene.ids());
    CHECK(r.rationale == "no lexical match");
}

TEST_CASE("filter is a subset of the scene and keeps the target on synthetic tasks")
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 60; ++i)
    {
        auto const c = gen::filterCase(rng, i, lexicon());
        auto const r = filterLexical(c.scene, c.task.utterance, lexicon());
        CHECK_MESSAGE(r.keptIds.contains(*c.task.gtObjectId), c.task.utterance);
        for (auto id: r.keptIds)
            CHECK(c.scene.find(id) != nullptr);
    }
}

TEST_CASE("lexicon parsing")
{
    auto const lex = Lexicon::fromJson(R"({"Sofa":["Couch","settee"]})");
    CHECK(lex.termsFor("sofa") == std::vector<std::string> { "sofa", "couch", "settee" });
    CHECK(lex.termsFor("lamp") == std::vector<std::string> { "lamp" });
    CHECK_THROWS_AS(Lexicon::fromJson(R"({"sofa":"couch"})"), ParseError);
    CHECK_THROWS_AS(Lexicon::fromJson("[1,2]"), ParseError);
}

TEST_CASE("llm filter reply parsing")
{
    auto const scene = fixtureScene();
    CHECK(parseFilterReply(scene, "Relevant: [18, 20, 21]") == IdSet { 18, 20, 21 });
    CHECK(parseFilterReply(scene, R"(["copier"])") == IdSet { 6 });
    CHECK_FALSE(parseFilterReply(scene, "none of them").has_value());
    CHECK_FALSE(parseFilterReply(scene, "[]").has_value());
}

TEST_CASE("llm filter keeps only scene ids and falls back on failure")
{
    auto const scene = fixtureScene();
    ScriptedLlm llm({ "[18, 21, 404]", "sorry", "[404]" });

    auto const r = filterLlm(scene, "the chair", llm, lexicon());
    CHECK(r.method == FilterMethod::Llm);
    CHECK(r.keptIds == IdSet { 18, 21 });
    REQUIRE(r.rationale.has_value());
    CHECK(r.rationale->find("dropped 1") != std::string::npos);

    auto const unparsed = filterLlm(scene, "the chair", llm, lexicon());
    CHECK(unparsed.method == FilterMethod::Lexical);
    CHECK(unparsed.keptIds == filterLexical(scene, "the chair", lexicon()).keptIds);

    auto const unknown = filterLlm(scene, "the chair", llm, lexicon());
    CHECK(unknown.method == FilterMethod::Lexical);

    ThrowingLlm offline;
    auto const down = filterLlm(scene, "the chair", offline, lexicon());
    CHECK(down.method == FilterMethod::Lexical);
    CHECK(down.rationale->find("offline") != std::string::npos);
}

TEST_CASE("filter prompt lists every object")
{
    auto const scene = fixtureScene();
    auto const prompt = buildFilterPrompt(scene, "the copier");
    for (auto const& obj: scene.objects)
        CHECK(prompt.find(fmt::format("{}: {}\n", obj.id, obj.category)) != std::string::npos);
    CHECK(prompt.find("the copier") != std::string::npos);
}

TEST_CASE("hypernym lookup agrees with a direct table scan")
{
    // oracle: read the lexicon file independently and collect categories listing "seat"
    auto const doc = nlohmann::json::parse(readFile(REFGROUND_LEXICON));
    std::set<std::string> seatCategories;
    for (auto const& [category, terms]: doc.items())
        for (auto const& t: terms)
            if (t.get<std::string>() == "seat")
                seatCategories.insert(category);
    REQUIRE(seatCategories.contains("chair"));
    REQUIRE(seatCategories.contains("armchair"));

    auto const scene = fixtureScene();
    IdSet expected;
    for (auto const& obj: scene.objects)
        if (seatCategories.contains(obj.category))
            expected.insert(obj.id);
    CHECK(filterLexical(scene, "the seat", lexicon()).keptIds == expected);
}

TEST_CASE("llm filter reply taken verbatim")
{
    auto const scene = fixtureScene();
    ScriptedLlm llm({ "[8, 15, 19]" });
    auto const r = filterLlm(scene, "chair in the corner", llm, lexicon());
    CHECK(r.method == FilterMethod::Llm);
    CHECK(r.keptIds == IdSet { 8, 15, 19 });
}

TEST_CASE("filtering is idempotent")
{
    std::mt19937_64 rng(12);
    for (int i = 0; i < 40; ++i)
    {
        auto const c = gen::filterCase(rng, i, lexicon());
        auto const once = filterLexical(c.scene, c.task.utterance, lexicon());
        auto const twice = filterLexical(restrictScene(c.scene, once.keptIds), c.task.utterance, lexicon());
        CHECK(twice.keptIds == once.keptIds);
    }
}
