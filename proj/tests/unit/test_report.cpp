#include <doctest.h>

#include <random>
#include <regex>

#include "discern/diagnostics.hpp"
#include "discern/error.hpp"
#include "discern/report.hpp"
#include "support.hpp"

using namespace discern;

namespace {

PerturbationPlan two_spec_plan() {
    return {TaskKind::translation,
            {{"char_delete", Level::character, Method::rule, Degree::minor, PerturbKind::delete_chars,
              Magnitude{10, false}, {}},
             {"word_delete", Level::word, Method::rule, Degree::minor, PerturbKind::delete_word_span,
              Magnitude{5, false}, {}}}};
}

ScoreSet random_set(std::mt19937_64& g, const std::string& pid, const std::string& metric, double shift) {
    std::uniform_int_distribution<int> s(1, 5);
    ScoreSet out{pid, metric, {}, {}};
    for (int i = 0; i < 30; ++i) {
        out.ids.push_back("i" + std::to_string(i));
        out.scores.push_back(std::max(1.0, s(g) - shift));
    }
    return out;
}

ModelAnalysis analysis(const std::string& model, const PerturbationPlan& plan, unsigned seed, Diagnostics& diag) {
    std::mt19937_64 g(seed);
    const auto& metrics = metrics_for(plan.task);
    std::map<std::string, ScoreSet> orig;
    for (const auto& m : metrics) orig[m] = random_set(g, "original", m, 0);
    std::vector<std::pair<std::string, std::map<std::string, ScoreSet>>> pert;
    for (const auto& s : plan.specs) {
        std::map<std::string, ScoreSet> by;
        for (const auto& m : metrics) by[m] = random_set(g, s.pid, m, 1);
        pert.emplace_back(s.pid, by);
    }
    ModelAnalysis a;
    a.model = model;
    a.grid = wilcoxon_grid(orig, pert, metrics, {}, diag);
    a.discernment = aggregate_discernment(a.grid, build_expert_weights(plan, std::nullopt, diag), level_weights(plan));
    a.exclusions = {{"char_delete", 2}};
    return a;
}

RunMetadata meta(const PerturbationPlan& plan) {
    RunMetadata m;
    m.config_hash = std::string(64, 'a');
    m.dataset = "mini";
    m.task = plan.task;
    m.plan_name = "mini";
    m.plan = plan;
    m.metrics = metrics_for(plan.task);
    m.seed = 3;
    m.n = 30;
    m.repeats = 5;
    m.templates_fingerprint = std::string(64, 'b');
    m.versions = {{"discern", "test"}};
    return m;
}

std::size_t count(const std::string& s, const std::string& needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
    return n;
}

}  // namespace

TEST_CASE("assemble_report") {
    const auto plan = two_spec_plan();
    Diagnostics diag;
    const auto one = assemble_report({analysis("a", plan, 1, diag)}, meta(plan), {"w1", "w2", "w1"});
    CHECK(one.models.size() == 1);
    CHECK(one.warnings == std::vector<std::string>{"w1", "w2"});
    CHECK(one.models[0].exclusions.at("char_delete") == 2);
    CHECK(one.models[0].exclusions.at("word_delete") == 0);

    const auto two = assemble_report({analysis("a", plan, 1, diag), analysis("b", plan, 2, diag)}, meta(plan), {});
    CHECK(two.models.size() == 2);
    const auto j = report_to_json(two);
    CHECK(j["results"].size() == 2);
    CHECK(j["metadata"]["plan"]["specs"].size() == 2);

    auto bad = analysis("c", plan, 3, diag);
    bad.grid.pids[1] = "sent_other";
    bad.discernment.pids[1] = "sent_other";
    try {
        assemble_report({analysis("a", plan, 1, diag), bad}, meta(plan), {});
        FAIL("expected PidMismatch");
    } catch (const StatsError& e) {
        CHECK(e.code() == "PidMismatch");
    }
    CHECK_THROWS_AS(assemble_report({analysis("a", plan, 1, diag), analysis("a", plan, 2, diag)}, meta(plan), {}),
                    Error);
}

TEST_CASE("JSON round trip and canonical text") {
    const auto plan = two_spec_plan();
    Diagnostics diag;
    const auto r = assemble_report({analysis("a", plan, 1, diag), analysis("b", plan, 5, diag)}, meta(plan),
                                   diag.warnings());
    const auto back = report_from_json(report_to_json(r));
    CHECK(back == r);
    const auto text = canonical_report_text(r);
    CHECK(text.back() == '\n');
    CHECK(canonical_report_text(report_from_json(nlohmann::json::parse(text))) == text);
    const auto j = nlohmann::json::parse(text);
    CHECK(j["schema_version"] == kReportSchemaVersion);
    for (const auto& t : j["results"][0]["perturbations"][0]["tests"]) {
        CHECK(t.contains("z_score"));
        CHECK(t["p_value"].get<double>() > 0);
    }
}

TEST_CASE("scores.csv") {
    const auto plan = two_spec_plan();
    Diagnostics diag;
    const auto r = assemble_report({analysis("a", plan, 1, diag), analysis("b", plan, 5, diag),
                                    analysis("c", plan, 9, diag)},
                                   meta(plan), {});
    const auto csv = scores_csv(r);
    CHECK(csv.rfind("model,pid,metric,p,D,D_ew,weight\n", 0) == 0);
    CHECK(count(csv, "\n") == 1 + 3 * 2);
    CHECK(csv.find("a,char_delete,accuracy+fluency,") != std::string::npos);
}

TEST_CASE("chart.svg") {
    const auto plan = two_spec_plan();
    Diagnostics diag;
    const auto r = assemble_report({analysis("a", plan, 1, diag), analysis("b", plan, 5, diag)}, meta(plan), {});
    const auto one = chart_svg({r});
    CHECK(count(one, "class=\"reference-line\"") == 1);
    CHECK(count(one, "class=\"panel\"") == 1);
    CHECK(count(one, "class=\"bar\"") == 8);
    CHECK(one.find("stroke=\"red\"") != std::string::npos);

    const auto three = chart_svg({r, r, r});
    CHECK(count(three, "class=\"panel\"") == 3);
    CHECK(count(three, "class=\"reference-line\"") == 3);

    // The reference line sits where a bar of height D = 1 would end.
    const std::regex axis(R"re(<line x1="([\d.]+)" y1="([\d.]+)" x2="[\d.]+" y2="([\d.]+)" stroke="black"/>)re");
    const std::regex ref(R"re(class="reference-line" x1="[\d.]+" y1="([\d.]+)")re");
    const std::regex bar(R"re(data-metric="D_avg" x="[\d.]+" y="([\d.]+)" width="[\d.]+" height="([\d.]+)")re");
    std::smatch a, l, b;
    REQUIRE(std::regex_search(one, a, axis));
    REQUIRE(std::regex_search(one, l, ref));
    REQUIRE(std::regex_search(one, b, bar));
    const double top = std::stod(a[2]), bottom = std::stod(a[3]);
    const double y_ref = std::stod(l[1]);
    const double bar_h = std::stod(b[2]);
    const double d_avg = r.models[0].discernment.D_avg;
    const double px_per_unit = bar_h / d_avg;
    CHECK(bottom - y_ref == doctest::Approx(px_per_unit).epsilon(0.02));
    CHECK(y_ref > top);
}

TEST_CASE("write_outputs") {
    testing::TempDir dir("report");
    const auto plan = two_spec_plan();
    Diagnostics diag;
    const auto r = assemble_report({analysis("a", plan, 1, diag)}, meta(plan), {});
    const auto files = write_outputs(r, dir.path());
    REQUIRE(files.size() == 3);
    for (const auto& f : files) CHECK(std::filesystem::exists(f));
    CHECK(testing::read_text(dir.path() / "report.json") == canonical_report_text(r));
    const auto again = write_outputs(r, dir.path());
    CHECK(testing::read_text(dir.path() / "report.json") == canonical_report_text(r));
}
