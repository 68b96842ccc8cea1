#include <algorithm>
#include <array>
#include <fstream>
#include <unordered_set>

#include "discern/error.hpp"
#include "discern/perturb.hpp"
#include "discern/resources.hpp"
#include "discern/templates.hpp"

namespace discern {

using json = nlohmann::json;

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<E, N>& values, const char* what) {
    for (E v : values) {
        if (to_string(v) == s) return v;
    }
    throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "'", "InvalidPlan");
}

constexpr std::array kLevels{Level::character, Level::word, Level::sentence};
constexpr std::array kMethods{Method::rule, Method::llm};
constexpr std::array kDegrees{Degree::minor, Degree::major, Degree::none};
constexpr std::array kKinds{PerturbKind::delete_chars,       PerturbKind::typos,
                            PerturbKind::delete_word_span,   PerturbKind::shuffle_sentences,
                            PerturbKind::random_ending,      PerturbKind::wrong_ending,
                            PerturbKind::random_answer,      PerturbKind::fictional_entities,
                            PerturbKind::grammatical_errors, PerturbKind::rewrite_insert};

[[noreturn]] void invalid(const std::string& pid, const std::string& msg) {
    throw ConfigError("plan spec '" + pid + "': " + msg, "InvalidPlan");
}

}  // namespace

std::string_view to_string(Level v) {
    switch (v) {
        case Level::character: return "character";
        case Level::word: return "word";
        case Level::sentence: return "sentence";
    }
    return "?";
}

std::string_view to_string(Method v) { return v == Method::rule ? "rule" : "llm"; }

std::string_view to_string(Degree v) {
    switch (v) {
        case Degree::minor: return "minor";
        case Degree::major: return "major";
        case Degree::none: return "none";
    }
    return "?";
}

std::string_view to_string(PerturbKind v) {
    switch (v) {
        case PerturbKind::delete_chars: return "delete_chars";
        case PerturbKind::typos: return "typos";
        case PerturbKind::delete_word_span: return "delete_word_span";
        case PerturbKind::shuffle_sentences: return "shuffle_sentences";
        case PerturbKind::random_ending: return "random_ending";
        case PerturbKind::wrong_ending: return "wrong_ending";
        case PerturbKind::random_answer: return "random_answer";
        case PerturbKind::fictional_entities: return "fictional_entities";
        case PerturbKind::grammatical_errors: return "grammatical_errors";
        case PerturbKind::rewrite_insert: return "rewrite_insert";
    }
    return "?";
}

Level parse_level(std::string_view s) { return parse_enum(s, kLevels, "level"); }
Method parse_method(std::string_view s) { return parse_enum(s, kMethods, "method"); }
Degree parse_degree(std::string_view s) { return parse_enum(s, kDegrees, "degree"); }
PerturbKind parse_kind(std::string_view s) { return parse_enum(s, kKinds, "kind"); }

bool is_rule_kind(PerturbKind kind) {
    switch (kind) {
        case PerturbKind::delete_chars:
        case PerturbKind::typos:
        case PerturbKind::delete_word_span:
        case PerturbKind::shuffle_sentences:
        case PerturbKind::random_ending:
        case PerturbKind::wrong_ending:
        case PerturbKind::random_answer: return true;
        default: return false;
    }
}

namespace {

bool needs_magnitude(PerturbKind kind) {
    return kind == PerturbKind::delete_chars || kind == PerturbKind::typos ||
           kind == PerturbKind::delete_word_span || kind == PerturbKind::shuffle_sentences;
}

}  // namespace

bool degree_none_allowed(TaskKind task, PerturbKind kind) {
    switch (task) {
        case TaskKind::story_completion: return true;
        case TaskKind::question_answering: return kind == PerturbKind::random_answer;
        case TaskKind::translation:
            return kind == PerturbKind::fictional_entities || kind == PerturbKind::grammatical_errors;
        case TaskKind::summarization: return false;
    }
    return false;
}

void validate_spec(const PerturbationSpec& spec, TaskKind task) {
    if (spec.pid.empty()) invalid(spec.pid, "pid must be non-empty");
    if (spec.pid == kOriginalPid) invalid(spec.pid, "pid 'original' is reserved");
    const bool rule = is_rule_kind(spec.kind);
    if (rule != (spec.method == Method::rule)) {
        invalid(spec.pid, "kind " + std::string(to_string(spec.kind)) + " requires method " +
                              (rule ? "rule" : "llm"));
    }
    if (spec.method == Method::llm && !spec.template_id) invalid(spec.pid, "llm spec needs template_id");
    if (needs_magnitude(spec.kind)) {
        if (!spec.k) invalid(spec.pid, "kind " + std::string(to_string(spec.kind)) + " needs k");
        if (spec.k->all && spec.kind != PerturbKind::shuffle_sentences) {
            invalid(spec.pid, "k=\"all\" is only valid for shuffle_sentences");
        }
        if (!spec.k->all && spec.k->count == 0) invalid(spec.pid, "k must be positive");
    }
    if (spec.degree == Degree::none && !degree_none_allowed(task, spec.kind)) {
        invalid(spec.pid, "degree none is not defined for " + std::string(to_string(spec.kind)) +
                              " in " + std::string(to_string(task)));
    }
    if ((spec.kind == PerturbKind::random_ending || spec.kind == PerturbKind::wrong_ending) &&
        task != TaskKind::story_completion) {
        invalid(spec.pid, "ending substitution applies to story_completion only");
    }
    if (spec.kind == PerturbKind::random_answer && task != TaskKind::question_answering) {
        invalid(spec.pid, "random_answer applies to question_answering only");
    }
}

void validate_plan(const PerturbationPlan& plan, const TemplateStore* templates) {
    std::unordered_set<std::string> pids;
    for (const auto& spec : plan.specs) {
        validate_spec(spec, plan.task);
        if (!pids.insert(spec.pid).second) invalid(spec.pid, "duplicate pid");
        if (templates && spec.template_id && !templates->contains(*spec.template_id)) {
            invalid(spec.pid, "unknown template_id '" + *spec.template_id + "'");
        }
    }
}

PerturbationPlan plan_from_json(const json& j) {
    try {
        PerturbationPlan plan;
        plan.task = parse_task(j.at("task").get<std::string>());
        for (const auto& s : j.at("specs")) {
            PerturbationSpec spec;
            spec.pid = s.at("pid").get<std::string>();
            spec.level = parse_level(s.at("level").get<std::string>());
            spec.method = parse_method(s.at("method").get<std::string>());
            spec.degree = parse_degree(s.at("degree").get<std::string>());
            spec.kind = parse_kind(s.at("kind").get<std::string>());
            if (auto it = s.find("k"); it != s.end() && !it->is_null()) {
                if (it->is_string()) {
                    if (it->get<std::string>() != "all") invalid(spec.pid, "k must be a count or \"all\"");
                    spec.k = Magnitude::every();
                } else {
                    const auto v = it->get<long long>();
                    if (v <= 0) invalid(spec.pid, "k must be positive");
                    spec.k = Magnitude{static_cast<std::size_t>(v), false};
                }
            }
            if (auto it = s.find("template_id"); it != s.end() && !it->is_null()) {
                spec.template_id = it->get<std::string>();
            }
            plan.specs.push_back(std::move(spec));
        }
        validate_plan(plan);
        return plan;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed plan: ") + e.what(), "InvalidPlan");
    }
}

json plan_to_json(const PerturbationPlan& plan) {
    json specs = json::array();
    for (const auto& spec : plan.specs) {
        json s{{"pid", spec.pid},
               {"level", to_string(spec.level)},
               {"method", to_string(spec.method)},
               {"degree", to_string(spec.degree)},
               {"kind", to_string(spec.kind)}};
        if (spec.k) s["k"] = spec.k->all ? json("all") : json(spec.k->count);
        if (spec.template_id) s["template_id"] = *spec.template_id;
        specs.push_back(std::move(s));
    }
    return {{"task", to_string(plan.task)}, {"specs", std::move(specs)}};
}

PerturbationPlan load_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read plan file " + path.string(), "MissingFile");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("plan " + path.string() + ": " + e.what(), "InvalidPlan");
    }
    return plan_from_json(j);
}

std::vector<std::string> builtin_plan_names() {
    return {"summeval", "sumpubmed", "storycloze", "answer_eq", "wmt22_de_en", "wmt22_zh_en"};
}

PerturbationPlan builtin_plan(std::string_view name) {
    const auto names = builtin_plan_names();
    if (std::find(names.begin(), names.end(), name) == names.end()) {
        throw ConfigError("unknown built-in plan '" + std::string(name) + "'", "InvalidPlan");
    }
    const auto body = embedded_resource("plans/" + std::string(name) + ".json");
    if (!body) throw ConfigError("built-in plan '" + std::string(name) + "' missing", "InvalidPlan");
    return plan_from_json(json::parse(*body));
}

PerturbationPlan resolve_plan(std::string_view name_or_path, const std::filesystem::path& base_dir) {
    const auto names = builtin_plan_names();
    if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
        return builtin_plan(name_or_path);
    }
    std::filesystem::path p(name_or_path);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return load_plan(p);
}

}  // namespace discern
