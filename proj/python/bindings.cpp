// SPDX-License-Identifier: Apache-2.0
#include <refground/error.hpp>
#include <refground/eval.hpp>
#include <refground/filter.hpp>
#include <refground/geometry.hpp>
#include <refground/reasoning.hpp>
#include <refground/sandbox.hpp>
#include <refground/scene.hpp>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace refground;

namespace
{

using Triple = std::array<double, 3>;

auto vec(Triple const& t) -> Vec3
{
    return { t[0], t[1], t[2] };
}

auto triple(Vec3 const& v) -> Triple
{
    return { v.x, v.y, v.z };
}

auto box(Triple const& center, Triple const& size) -> Aabb
{
    return { vec(center), vec(size) };
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Scene transcripts, geometry helpers, relevance filtering, answer parsing and scoring.";
    m.attr("__version__") = "0.1.0";

    auto error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", error.ptr());
    py::register_exception<SchemaError>(m, "SchemaError", error.ptr());
    py::register_exception<DomainError>(m, "DomainError", error.ptr());
    py::register_exception<MetadataError>(m, "MetadataError", error.ptr());
    py::register_exception<TransportError>(m, "TransportError", error.ptr());

    // geometry
    m.def("iou3d", [](Triple ca, Triple sa, Triple cb, Triple sb) { return iou3d(box(ca, sa), box(cb, sb)); },
          py::arg("center_a"), py::arg("size_a"), py::arg("center_b"), py::arg("size_b"));
    m.def(
        "rgb_to_hsl",
        [](Rgb rgb) {
            auto const hsl = rgbToHsl(rgb);
            return std::make_tuple(hsl.h, hsl.s, hsl.l);
        },
        py::arg("rgb"));
    m.def(
        "hsl_to_rgb", [](Triple hsl) { return hslToRgb({ hsl[0], hsl[1], hsl[2] }); }, py::arg("hsl"));
    m.def(
        "color_distance",
        [](Triple a, Triple b) { return colorDistance({ a[0], a[1], a[2] }, { b[0], b[1], b[2] }); },
        py::arg("hsl_a"), py::arg("hsl_b"));
    m.def(
        "point_plane_distance",
        [](Triple p, Triple point, Triple normal) { return pointPlaneDistance(vec(p), { vec(point), vec(normal) }); },
        py::arg("p"), py::arg("plane_point"), py::arg("normal"));
    m.def(
        "left_right_of",
        [](Triple anchor, Triple candidate, Triple observer) {
            return std::string(toString(leftRightOf(vec(anchor), vec(candidate), vec(observer))));
        },
        py::arg("anchor"), py::arg("candidate"), py::arg("observer"));
    m.def(
        "betweenness", [](Triple a, Triple b, Triple x) { return betweenness(vec(a), vec(b), vec(x)); },
        py::arg("a"), py::arg("b"), py::arg("x"));
    m.def(
        "corner_score",
        [](Triple center, Triple size, std::vector<std::pair<Triple, Triple>> const& walls) {
            std::vector<Aabb> boxes;
            for (auto const& [c, s]: walls)
                boxes.push_back(box(c, s));
            return cornerScore(box(center, size), boxes);
        },
        py::arg("center"), py::arg("size"), py::arg("walls"));

    // scene
    py::class_<ObjectRecord>(m, "ObjectRecord")
        .def(py::init([](ObjectId id, std::string category, Triple center, Triple size, Rgb rgb) {
                 return ObjectRecord { id, std::move(category), vec(center), vec(size), rgb };
             }),
             py::arg("id"), py::arg("category"), py::arg("center"), py::arg("size"), py::arg("rgb"))
        .def_readonly("id", &ObjectRecord::id)
        .def_readonly("category", &ObjectRecord::category)
        .def_property_readonly("center", [](ObjectRecord const& o) { return triple(o.center); })
        .def_property_readonly("size", [](ObjectRecord const& o) { return triple(o.size); })
        .def_readonly("rgb", &ObjectRecord::rgb)
        .def("__eq__", [](ObjectRecord const& a, ObjectRecord const& b) { return a == b; })
        .def("__repr__",
             [](ObjectRecord const& o) { return "<ObjectRecord " + o.category + " id=" + std::to_string(o.id) + ">"; });

    py::class_<SceneTranscript>(m, "SceneTranscript")
        .def(py::init([](std::string sceneId, Triple center, std::vector<ObjectRecord> objects) {
                 SceneTranscript scene { std::move(sceneId), vec(center), std::move(objects) };
                 validateScene(scene, false);
                 return scene;
             }),
             py::arg("scene_id"), py::arg("scene_center"), py::arg("objects"))
        .def_readonly("scene_id", &SceneTranscript::sceneId)
        .def_property_readonly("scene_center", [](SceneTranscript const& s) { return triple(s.sceneCenter); })
        .def_readonly("objects", &SceneTranscript::objects)
        .def("ids", &SceneTranscript::ids)
        .def("__eq__", [](SceneTranscript const& a, SceneTranscript const& b) { return a == b; })
        .def("__len__", [](SceneTranscript const& s) { return s.objects.size(); });

    m.def("parse_detections", &parseDetections, py::arg("json"));
    m.def("load_detections", &loadDetections, py::arg("path"));
    m.def("render_transcript", &renderTranscript, py::arg("scene"), py::arg("ids") = py::none());
    m.def("parse_transcript", &parseTranscript, py::arg("text"));

    // filter
    py::class_<Lexicon>(m, "Lexicon")
        .def(py::init<>())
        .def(py::init<std::map<std::string, std::vector<std::string>>>(), py::arg("entries"))
        .def_static("from_json", &Lexicon::fromJson, py::arg("json"))
        .def_static("load", &Lexicon::load, py::arg("path"))
        .def("terms_for", &Lexicon::termsFor, py::arg("category"));

    py::class_<FilterResult>(m, "FilterResult")
        .def_readonly("kept_ids", &FilterResult::keptIds)
        .def_property_readonly("method", [](FilterResult const& r) { return std::string(toString(r.method)); })
        .def_readonly("rationale", &FilterResult::rationale);

    m.def("filter_lexical", &filterLexical, py::arg("scene"), py::arg("utterance"), py::arg("lexicon") = Lexicon {});

    // reasoning
    m.def("format_answer", &formatAnswer, py::arg("object_id"));
    m.def("extract_answer", &extractAnswer, py::arg("text"));
    m.def(
        "extract_code_blocks",
        [](std::string_view text) {
            std::vector<std::string> out;
            for (auto& b: extractCodeBlocks(text))
                out.push_back(std::move(b.code));
            return out;
        },
        py::arg("text"));
    m.def(
        "build_prompt",
        [](std::string_view sceneText, std::string_view utterance, std::string_view mode) {
            std::vector<std::pair<std::string, std::string>> out;
            for (auto const& t: buildPrompt(sceneText, utterance, promptModeFromString(mode)))
                out.emplace_back(toString(t.role), t.content);
            return out;
        },
        py::arg("scene_text"), py::arg("utterance"), py::arg("mode") = "principles");
    m.def(
        "ground_scripted",
        [](std::string_view taskJson, SceneTranscript const& scene, std::vector<std::string> responses,
           Lexicon const& lexicon, std::string_view mode, int maxRounds) {
            auto const task = taskFromJson(taskJson);
            ScriptedLlm llm(std::move(responses));
            Sandbox sandbox(fakeFactory());
            GroundConfig config;
            config.mode = promptModeFromString(mode);
            config.loop.maxRounds = maxRounds;
            config.loop.retry.initialBackoff = std::chrono::milliseconds { 0 };
            config.lexicon = &lexicon;
            auto const result = ground(task, scene, llm, sandbox, config);
            return py::make_tuple(result.objectId, traceToJson(result.trace));
        },
        py::arg("task_json"), py::arg("scene"), py::arg("responses"), py::arg("lexicon") = Lexicon {},
        py::arg("mode") = "principles", py::arg("max_rounds") = 10);
    m.def("helper_source", [] { return std::string(helperSource()); });

    // eval
    m.def(
        "classify_difficulty",
        [](std::string_view taskJson) {
            return std::string(classifyDifficulty(taskFromJson(taskJson)) == Difficulty::Easy ? "easy" : "hard");
        },
        py::arg("task_json"));
    m.def(
        "score_referit3d",
        [](IdPredictions const& predictions, std::vector<std::string> const& taskLines) {
            std::vector<GroundingTask> tasks;
            for (auto const& line: taskLines)
                tasks.push_back(taskFromJson(line));
            return reportToJson(scoreReferIt3D(predictions, tasks));
        },
        py::arg("predictions"), py::arg("tasks"));
    m.def(
        "sample_subset",
        [](std::vector<std::string> const& taskLines, std::size_t n, std::uint64_t seed) {
            std::vector<GroundingTask> tasks;
            for (auto const& line: taskLines)
                tasks.push_back(taskFromJson(line));
            std::vector<std::string> ids;
            for (auto const& t: sampleSubset(tasks, n, seed))
                ids.push_back(t.taskId);
            return ids;
        },
        py::arg("tasks"), py::arg("n"), py::arg("seed"));
}
