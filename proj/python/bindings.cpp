// Python extension `discern._core`. Structured values cross the boundary as
// JSON text; the `discern` package wraps them into dicts.

#include <optional>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "discern/config.hpp"
#include "discern/corpus.hpp"
#include "discern/error.hpp"
#include "discern/evaluate.hpp"
#include "discern/perturb.hpp"
#include "discern/pipeline.hpp"
#include "discern/rng.hpp"
#include "discern/stats.hpp"
#include "discern/text.hpp"

namespace py = pybind11;
using namespace discern;
using nlohmann::json;

namespace {

std::string outcome_json(const WilcoxonOutcome& o) {
    return json{{"statistic", o.statistic},
                {"p_value", o.p_value},
                {"n_effective", o.n_effective},
                {"mode_used", to_string(o.mode_used)},
                {"all_zero", o.all_zero},
                {"z_score", o.z_score ? json(*o.z_score) : json(nullptr)}}
        .dump();
}

Magnitude magnitude(const py::object& k) {
    if (py::isinstance<py::str>(k)) {
        if (k.cast<std::string>() != "all") throw py::value_error("k must be an integer or \"all\"");
        return Magnitude::every();
    }
    return {k.cast<std::size_t>(), false};
}

template <typename Fn>
std::string transform(std::string_view text, std::int64_t seed, std::string_view pid, std::string_view id, Fn&& fn) {
    auto rng = RngStream::for_item(seed, pid, id);
    return fn(text, rng);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Discernment benchmark core";

    // Carries the machine-readable `code` and the CLI `exit_code`.
    static PyObject* error = PyErr_NewException("discern._core.DiscernError", PyExc_RuntimeError, nullptr);
    m.attr("DiscernError") = py::handle(error);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object inst = py::handle(error)(e.what());
            inst.attr("code") = e.code();
            inst.attr("exit_code") = e.exit_code();
            PyErr_SetObject(error, inst.ptr());
        }
    });

    m.def(
        "wilcoxon",
        [](const std::vector<double>& original, const std::vector<double>& perturbed, const std::string& mode,
           const std::string& zero_method) {
            return outcome_json(wilcoxon_one_sided({original, perturbed}, parse_wilcoxon_mode(mode),
                                                   parse_zero_method(zero_method)));
        },
        py::arg("original"), py::arg("perturbed"), py::arg("mode") = "auto", py::arg("zero_method") = "drop");
    m.def(
        "enumeration_oracle",
        [](const std::vector<double>& original, const std::vector<double>& perturbed) {
            return wilcoxon_enumeration_oracle({original, perturbed});
        },
        py::arg("original"), py::arg("perturbed"));
    m.def("hmp", &hmp, py::arg("p_values"));
    m.def("hmp_weighted", &hmp_weighted, py::arg("p_values"), py::arg("weights"));
    m.def("discernment_score", &discernment_score, py::arg("p"));
    m.def("expert_weights_from_votes", &expert_weights_from_votes, py::arg("votes"), py::arg("metrics"));
    m.def(
        "level_weights", [](const std::string& plan_json) { return level_weights(plan_from_json(json::parse(plan_json))); },
        py::arg("plan_json"));
    m.def(
        "builtin_plan", [](const std::string& name) { return plan_to_json(builtin_plan(name)).dump(); },
        py::arg("name"));
    m.def("builtin_plan_names", &builtin_plan_names);

    m.def("split_sentences", [](const std::string& s) { return text::split_sentences(s); }, py::arg("text"));
    m.def("tokenize_words", [](const std::string& s) { return text::tokenize_words(s); }, py::arg("text"));
    m.def("count_graphemes", [](const std::string& s) { return text::count_graphemes(s); }, py::arg("text"));

    m.def(
        "delete_chars",
        [](const std::string& text, std::size_t k, std::int64_t seed, const std::string& pid, const std::string& id) {
            return transform(text, seed, pid, id, [&](std::string_view t, RngStream& r) { return delete_random_chars(t, k, r); });
        },
        py::arg("text"), py::arg("k"), py::arg("seed"), py::arg("pid") = "char_delete", py::arg("id") = "");
    m.def(
        "inject_typos",
        [](const std::string& text, std::size_t k, std::int64_t seed, const std::string& pid, const std::string& id) {
            return transform(text, seed, pid, id, [&](std::string_view t, RngStream& r) { return discern::inject_typos(t, k, r); });
        },
        py::arg("text"), py::arg("k"), py::arg("seed"), py::arg("pid") = "char_typos", py::arg("id") = "");
    m.def(
        "delete_word_span",
        [](const std::string& text, std::size_t k, std::int64_t seed, const std::string& pid, const std::string& id) {
            return transform(text, seed, pid, id, [&](std::string_view t, RngStream& r) { return discern::delete_word_span(t, k, r); });
        },
        py::arg("text"), py::arg("k"), py::arg("seed"), py::arg("pid") = "word_delete", py::arg("id") = "");
    m.def(
        "shuffle_sentences",
        [](const std::string& text, const py::object& k, std::int64_t seed, const std::string& pid, const std::string& id) {
            const auto mag = magnitude(k);
            return transform(text, seed, pid, id, [&](std::string_view t, RngStream& r) { return discern::shuffle_sentences(t, mag, r); });
        },
        py::arg("text"), py::arg("k"), py::arg("seed"), py::arg("pid") = "sent_reorder", py::arg("id") = "");

    m.def("parse_score", &parse_score, py::arg("text"), py::arg("scale_min") = 1.0, py::arg("scale_max") = 5.0);

    m.def(
        "corpus_stats",
        [](const std::filesystem::path& path, const std::string& task) {
            const auto s = corpus_stats(load_corpus(path, parse_task(task)));
            return std::vector<double>{s.avg_chars, s.avg_words, s.avg_sentences};
        },
        py::arg("path"), py::arg("task"));

    m.def("config_hash", [](const std::filesystem::path& path) { return config_hash(load_config(path)); },
          py::arg("config"));
    m.def(
        "run",
        [](const std::filesystem::path& config, bool offline, std::optional<std::filesystem::path> out,
           std::optional<std::int64_t> seed) {
            auto cfg = load_config(config);
            if (seed) cfg.seed = *seed;
            if (offline) make_offline(cfg);
            if (out) cfg.output_dir = std::filesystem::absolute(*out).lexically_normal().string();
            py::gil_scoped_release release;
            Pipeline p(cfg);
            return canonical_report_text(p.run());
        },
        py::arg("config"), py::arg("offline") = false, py::arg("out") = std::nullopt, py::arg("seed") = std::nullopt);
}
