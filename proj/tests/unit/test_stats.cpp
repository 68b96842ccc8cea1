#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "discern/diagnostics.hpp"
#include "discern/error.hpp"
#include "discern/evaluate.hpp"
#include "discern/stats.hpp"

using namespace discern;

namespace {

PairedScores from_diffs(const std::vector<double>& d) {
    PairedScores p;
    for (double x : d) {
        p.original.push_back(3 + x);
        p.perturbed.push_back(3);
    }
    return p;
}

/// Repeat-averaged integer scores 1..5, as the evaluate stage produces.
std::vector<double> averaged_scores(std::mt19937_64& g, std::size_t n, int repeats) {
    std::uniform_int_distribution<int> s(1, 5);
    std::vector<double> v(n);
    for (auto& x : v) {
        int sum = 0;
        for (int r = 0; r < repeats; ++r) sum += s(g);
        x = static_cast<double>(sum) / repeats;
    }
    return v;
}

ScoreSet set(const std::string& pid, const std::string& metric, std::vector<std::optional<double>> v) {
    ScoreSet s;
    s.pid = pid;
    s.metric = metric;
    for (std::size_t i = 0; i < v.size(); ++i) s.ids.push_back("i" + std::to_string(i));
    s.scores = std::move(v);
    return s;
}

PerturbationSpec spec(std::string pid, Level level) {
    return {std::move(pid), level, Method::rule, Degree::minor, PerturbKind::delete_chars, Magnitude{1, false}, {}};
}

}  // namespace

TEST_CASE("known W-test values") {
    const auto w = wilcoxon_one_sided(from_diffs({1, 2, 3, 4, 5}));
    CHECK(w.statistic == 15);
    CHECK(w.p_value == 0.03125);
    CHECK(w.mode_used == WilcoxonMode::exact);
    CHECK(w.n_effective == 5);
    CHECK_FALSE(w.z_score);

    const auto z = wilcoxon_one_sided(from_diffs({0, 0, 0}));
    CHECK(z.all_zero);
    CHECK(z.p_value == 1.0);
    CHECK(discernment_score(z.p_value) == 0.0);

    // Ten equal differences: ties force the normal path under auto.
    const auto t = wilcoxon_one_sided(from_diffs(std::vector<double>(10, 1)));
    CHECK(t.mode_used == WilcoxonMode::normal);
    CHECK(t.z_score);
    CHECK(std::abs(t.p_value - 1.0 / 1024) < 0.002);
    CHECK(wilcoxon_one_sided(from_diffs(std::vector<double>(10, 1)), WilcoxonMode::exact).p_value ==
          doctest::Approx(1.0 / 1024).epsilon(1e-12));
}

TEST_CASE("enumeration oracle known values") {
    CHECK(wilcoxon_enumeration_oracle(from_diffs({1})) == 0.5);
    CHECK(wilcoxon_enumeration_oracle(from_diffs({1, 2, 3, 4, 5})) == 0.03125);
    CHECK(wilcoxon_enumeration_oracle(from_diffs({1, -1})) == 0.75);
    CHECK(wilcoxon_enumeration_oracle(from_diffs(std::vector<double>(10, 1))) == 1.0 / 1024);
    CHECK_THROWS_AS(wilcoxon_enumeration_oracle(from_diffs(std::vector<double>(21, 1))), StatsError);
}

TEST_CASE("W-test input errors") {
    PairedScores bad{{1, 2}, {1}};
    CHECK_THROWS_AS(wilcoxon_one_sided(bad), StatsError);
    CHECK_THROWS_AS(wilcoxon_one_sided(PairedScores{}), StatsError);
}

TEST_CASE("normal path formula") {
    // d = 1..8 plus a tie: midranks and the tie term by hand.
    const auto w = wilcoxon_one_sided(from_diffs({1, 2, 2, -3, 4, 5, 6, 7}), WilcoxonMode::normal);
    const double n = 8;
    const double wplus = 1 + 2.5 + 2.5 + 5 + 6 + 7 + 8;
    const double var = n * (n + 1) * (2 * n + 1) / 24 - (8 - 2) / 48.0;
    const double z = (wplus - n * (n + 1) / 4) / std::sqrt(var);
    CHECK(w.statistic == wplus);
    CHECK(*w.z_score == doctest::Approx(z).epsilon(1e-12));
    CHECK(w.p_value == doctest::Approx(0.5 * std::erfc(z / std::sqrt(2.0))).epsilon(1e-12));
}

TEST_CASE("zero_split keeps zeros at half credit") {
    const auto pair = from_diffs({0, 1, 2, 3});
    const auto drop = wilcoxon_one_sided(pair, WilcoxonMode::exact, ZeroMethod::drop);
    const auto split = wilcoxon_one_sided(pair, WilcoxonMode::exact, ZeroMethod::zero_split);
    CHECK(drop.n_effective == 3);
    CHECK(drop.p_value == 0.125);
    CHECK(split.n_effective == 3);
    CHECK(split.statistic == 9.5);  // ranks 2+3+4 plus half of rank 1
    // The zero's half rank is fixed under the null, so only ranks 2..4 vary.
    CHECK(split.p_value == 0.125);
    const auto split2 = wilcoxon_one_sided(from_diffs({0, 1, 2, -3}), WilcoxonMode::exact, ZeroMethod::zero_split);
    const auto drop2 = wilcoxon_one_sided(from_diffs({0, 1, 2, -3}), WilcoxonMode::exact, ZeroMethod::drop);
    CHECK(split2.p_value != drop2.p_value);
}

TEST_CASE("property: exact path equals the enumeration oracle") {
    std::mt19937_64 g(12345);
    for (int trial = 0; trial < 400; ++trial) {
        const std::size_t n = 3 + trial % 13;
        PairedScores p{averaged_scores(g, n, 5), averaged_scores(g, n, 5)};
        const auto w = wilcoxon_one_sided(p, WilcoxonMode::exact);
        if (w.all_zero) continue;
        CHECK(std::abs(w.p_value - wilcoxon_enumeration_oracle(p)) <= 1e-12);
    }
}

TEST_CASE("property: shift and scale invariance") {
    std::mt19937_64 g(99);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 5 + trial % 96;
        PairedScores p{averaged_scores(g, n, 5), averaged_scores(g, n, 5)};
        const auto base = wilcoxon_one_sided(p);
        for (double c : {-2.0, 0.7, 3.0}) {
            PairedScores q = p;
            for (auto& x : q.original) x += c;
            for (auto& x : q.perturbed) x += c;
            const auto w = wilcoxon_one_sided(q);
            CHECK(w.p_value == base.p_value);
            CHECK(w.statistic == base.statistic);
        }
        for (double c : {0.5, 2.0}) {
            PairedScores q = p;
            for (auto& x : q.original) x *= c;
            for (auto& x : q.perturbed) x *= c;
            CHECK(wilcoxon_one_sided(q).p_value == base.p_value);
        }
    }
}

TEST_CASE("property: exchanging samples on tie-free data") {
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 3 + trial % 10;
        PairedScores p;
        for (std::size_t i = 0; i < n; ++i) {
            p.original.push_back(u(g));
            p.perturbed.push_back(u(g));
        }
        PairedScores q{p.perturbed, p.original};
        const auto a = wilcoxon_one_sided(p, WilcoxonMode::exact);
        const auto b = wilcoxon_one_sided(q, WilcoxonMode::exact);
        // P(W+* = w) by enumeration.
        double eq = 0;
        std::vector<double> d(n);
        for (std::size_t i = 0; i < n; ++i) d[i] = p.original[i] - p.perturbed[i];
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto x, auto y) { return std::abs(d[x]) < std::abs(d[y]); });
        for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
            double s = 0;
            for (std::size_t r = 0; r < n; ++r) if (mask >> r & 1u) s += static_cast<double>(r + 1);
            if (s == a.statistic) eq += 1;
        }
        eq /= static_cast<double>(1u << n);
        CHECK(a.p_value + b.p_value == doctest::Approx(1 + eq).epsilon(1e-12));
    }
}

TEST_CASE("hmp") {
    CHECK(hmp({0.3}) == 0.3);
    CHECK(hmp({0.05, 0.05, 0.05}) == doctest::Approx(1.0 / 60).epsilon(1e-15));
    CHECK(hmp({0.01, 0.5, 0.04}) == doctest::Approx(1.0 / 127).epsilon(1e-15));
    CHECK_THROWS_AS(hmp({}), StatsError);
    CHECK_THROWS_AS(hmp({0.5, 0.0}), StatsError);
    CHECK_THROWS_AS(hmp({1.5}), StatsError);
}

TEST_CASE("hmp_weighted") {
    CHECK(hmp_weighted({1, 1, 1}, {0.2, 0.3, 0.5}) == 1.0);
    CHECK(hmp_weighted({0.01, 0.5, 0.04}, {0, 1, 0}) == 0.5);
    CHECK(hmp_weighted({0.01, 0.5, 0.04}, {0.4, 0.1, 0.5}) == doctest::Approx(1 / 52.7).epsilon(1e-14));
    CHECK_THROWS_AS(hmp_weighted({0.1, 0.2}, {0.5, 0.6}), StatsError);
    CHECK_THROWS_AS(hmp_weighted({0.1, 0.2}, {1.5, -0.5}), StatsError);
    CHECK_THROWS_AS(hmp_weighted({0.1}, {0.5, 0.5}), StatsError);
}

TEST_CASE("property: hmp bounds") {
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> u(1e-6, 1);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> p(1 + trial % 6);
        for (auto& x : p) x = u(g);
        CHECK(hmp(p) <= *std::min_element(p.begin(), p.end()));
        const auto j = static_cast<std::size_t>(trial) % p.size();
        std::vector<double> w(p.size(), 0);
        w[j] = 1;
        CHECK(hmp_weighted(p, w) == p[j]);
    }
}

TEST_CASE("discernment_score") {
    CHECK(discernment_score(0.05) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(discernment_score(1.0) == 0.0);
    CHECK(discernment_score(0.0025) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::isfinite(discernment_score(1e-320)));
    CHECK_THROWS(discernment_score(0.0));
    double prev = discernment_score(1.0);
    for (double p = 0.99; p > 1e-6; p *= 0.93) {
        const double d = discernment_score(p);
        CHECK(d > prev);
        CHECK((d >= 1) == (p <= 0.05));
        prev = d;
    }
}

TEST_CASE("expert_weights_from_votes") {
    CHECK(expert_weights_from_votes({{"coherence", 4}, {"consistency", 1}, {"fluency", 5}},
                                    {"coherence", "consistency", "fluency"}) == std::vector<double>{0.4, 0.1, 0.5});
    CHECK(expert_weights_from_votes({{"answer_quality", 10}}, {"answer_quality"}) == std::vector<double>{1.0});
    CHECK(expert_weights_from_votes({{"a", 1}, {"b", 1}}, {"a", "b"}) == std::vector<double>{0.5, 0.5});
    CHECK(expert_weights_from_votes({{"a", 3}}, {"a", "b"}) == std::vector<double>{1.0, 0.0});
    CHECK_THROWS_AS(expert_weights_from_votes({{"c", 1}}, {"a", "b"}), StatsError);
    CHECK_THROWS_AS(expert_weights_from_votes({{"a", 0}}, {"a", "b"}), StatsError);
    CHECK_THROWS_AS(expert_weights_from_votes({{"a", -1}, {"b", 2}}, {"a", "b"}), StatsError);
}

TEST_CASE("build_expert_weights") {
    PerturbationPlan plan{TaskKind::story_completion, {spec("x", Level::character), spec("y", Level::word)}};
    Diagnostics diag;
    const auto none = build_expert_weights(plan, std::nullopt, diag);
    CHECK(none.rows.at("x") == std::vector<double>(3, 1.0 / 3));
    CHECK(diag.size() == 1);

    ExpertVotes v;
    v.task = TaskKind::story_completion;
    v.votes["x"] = {{"coherence", 4}, {"consistency", 1}, {"fluency", 5}};
    v.votes["ghost"] = {{"fluency", 1}};
    Diagnostics d2;
    const auto ew = build_expert_weights(plan, v, d2);
    CHECK(ew.rows.at("x") == std::vector<double>{0.4, 0.1, 0.5});
    CHECK(ew.rows.at("y") == std::vector<double>(3, 1.0 / 3));
    CHECK(d2.size() == 2);  // y has no votes; ghost is not in the plan

    v.task = TaskKind::summarization;
    CHECK_THROWS_AS(build_expert_weights(plan, v, d2), Error);

    const auto parsed = parse_expert_votes(nlohmann::json::parse(
        R"({"task":"story_completion","votes":{"x":{"coherence":2,"fluency":2}}})"));
    CHECK(parsed.votes.at("x").at("fluency") == 2);
    CHECK_THROWS_AS(parse_expert_votes(nlohmann::json::parse(R"({"task":"story_completion"})")), Error);
}

TEST_CASE("level_weights") {
    PerturbationPlan even{TaskKind::summarization, {}};
    for (auto l : {Level::character, Level::word, Level::sentence}) {
        for (int i = 0; i < 4; ++i) even.specs.push_back(spec(std::string(to_string(l)) + std::to_string(i), l));
    }
    for (double w : level_weights(even)) CHECK(w == doctest::Approx(1.0 / 12).epsilon(1e-15));

    PerturbationPlan two{TaskKind::translation, {}};
    for (int i = 0; i < 4; ++i) two.specs.push_back(spec("c" + std::to_string(i), Level::character));
    for (int i = 0; i < 2; ++i) two.specs.push_back(spec("w" + std::to_string(i), Level::word));
    const auto w = level_weights(two);
    for (int i = 0; i < 4; ++i) CHECK(w[i] == 0.125);
    CHECK(w[4] == 0.25);
    CHECK(w[5] == 0.25);

    for (const auto& name : builtin_plan_names()) {
        const auto plan = builtin_plan(name);
        const auto lw = level_weights(plan);
        std::map<Level, double> per_level;
        double total = 0;
        for (std::size_t i = 0; i < lw.size(); ++i) {
            per_level[plan.specs[i].level] += lw[i];
            total += lw[i];
        }
        CHECK(total == doctest::Approx(1).epsilon(1e-12));
        for (const auto& [l, s] : per_level) CHECK(s == doctest::Approx(1.0 / per_level.size()).epsilon(1e-12));
    }
}

TEST_CASE("pair_scores drops holes pairwise") {
    const auto a = set("original", "m", {1, std::nullopt, 3, 4});
    const auto b = set("p", "m", {2, 2, std::nullopt, 1});
    const auto p = pair_scores(a, b);
    CHECK(p.original == std::vector<double>{1, 4});
    CHECK(p.perturbed == std::vector<double>{2, 1});
    auto c = b;
    c.ids[0] = "other";
    CHECK_THROWS_AS(pair_scores(a, c), StatsError);
}

TEST_CASE("grid and aggregation") {
    const std::vector<std::string> metrics{"m1", "m2"};
    std::map<std::string, ScoreSet> orig{{"m1", set("original", "m1", {5, 5, 5, 5, 5, 5})},
                                         {"m2", set("original", "m2", {4, 4, 4, 4, 4, 4})}};
    std::map<std::string, ScoreSet> strong{{"m1", set("a", "m1", {1, 2, 3, 2, 1, 4})},
                                           {"m2", set("a", "m2", {4, 4, 4, 4, 4, 4})}};
    std::map<std::string, ScoreSet> none{{"m1", orig.at("m1")}, {"m2", orig.at("m2")}};
    Diagnostics diag;
    const auto grid = wilcoxon_grid(orig, {{"a", strong}, {"b", none}}, metrics, {}, diag);
    REQUIRE(grid.cells.size() == 2);
    CHECK(grid.cells[0][1].all_zero);
    CHECK(grid.cells[1][0].all_zero);
    CHECK(diag.size() == 3);

    PerturbationPlan plan{TaskKind::translation, {spec("a", Level::character), spec("b", Level::word)}};
    Diagnostics d2;
    const auto ew = build_expert_weights(plan, std::nullopt, d2);
    ExpertWeights custom{{"m1", "m2"}, {{"a", {1, 0}}, {"b", {0.5, 0.5}}}};
    const auto r = aggregate_discernment(grid, custom, level_weights(plan));
    CHECK(r.p[0] == doctest::Approx(1 / (1 / grid.cells[0][0].p_value + 1)).epsilon(1e-15));
    CHECK(r.p_ew[0] == grid.cells[0][0].p_value);
    // Two p = 1 combine to 1/2 without the 1/M factor.
    CHECK(r.p[1] == 0.5);
    CHECK(r.D_min == r.D[1]);
    CHECK(r.D_min <= r.D_avg);
    CHECK(r.D_ew_min <= r.D_ew_avg);
    CHECK(r.D_avg == doctest::Approx(0.5 * r.D[0] + 0.5 * r.D[1]).epsilon(1e-15));

    // Uniform weights through the normalized variant.
    const ExpertWeights uniform{{"m1", "m2"}, {{"a", {0.5, 0.5}}, {"b", {0.5, 0.5}}}};
    CHECK(ew.rows.size() == 2);
    const auto n = aggregate_discernment(grid, uniform, level_weights(plan), HmpVariant::normalized);
    CHECK(n.p[1] == 1.0);
    CHECK(n.p[0] == doctest::Approx(2 / (1 / grid.cells[0][0].p_value + 1)).epsilon(1e-15));
}

TEST_CASE("aggregate: equal D and single-metric identity") {
    PValueGrid grid{{"a", "b", "c"}, {"only"}, {}};
    for (int i = 0; i < 3; ++i) {
        WilcoxonOutcome o;
        o.p_value = 0.0025;
        o.n_effective = 10;
        grid.cells.push_back({o});
    }
    ExpertWeights ew{{"only"}, {{"a", {1}}, {"b", {1}}, {"c", {1}}}};
    const auto r = aggregate_discernment(grid, ew, {0.25, 0.25, 0.5});
    CHECK(r.D_avg == doctest::Approx(2).epsilon(1e-12));
    CHECK(r.D_min == doctest::Approx(2).epsilon(1e-12));
    CHECK(r.D == r.D_ew);
    CHECK(r.D_avg == r.D_ew_avg);
    CHECK(r.D_min == r.D_ew_min);
    CHECK_THROWS_AS(aggregate_discernment(grid, ew, {0.5, 0.5}), StatsError);
}

TEST_CASE("enum names round trip") {
    for (auto m : {WilcoxonMode::automatic, WilcoxonMode::exact, WilcoxonMode::normal}) {
        CHECK(parse_wilcoxon_mode(to_string(m)) == m);
    }
    CHECK(parse_zero_method("zero_split") == ZeroMethod::zero_split);
    CHECK(parse_hmp_variant("normalized") == HmpVariant::normalized);
    CHECK_THROWS(parse_wilcoxon_mode("fast"));
}
