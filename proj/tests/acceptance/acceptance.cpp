// Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. `--only N` runs a single criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "discern/config.hpp"
#include "discern/diagnostics.hpp"
#include "discern/evaluate.hpp"
#include "discern/perturb.hpp"
#include "discern/pipeline.hpp"
#include "discern/provider.hpp"
#include "discern/stats.hpp"
#include "discern/templates.hpp"
#include "discern/text.hpp"
#include "schema_check.hpp"

namespace fs = std::filesystem;
using namespace discern;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("discern-acceptance-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::vector<double> averaged(std::mt19937_64& g, std::size_t n, int repeats) {
    std::uniform_int_distribution<int> s(1, 5);
    std::vector<double> v(n);
    for (auto& x : v) {
        int sum = 0;
        for (int r = 0; r < repeats; ++r) sum += s(g);
        x = static_cast<double>(sum) / repeats;
    }
    return v;
}

// ---------------------------------------------------------------------------

Outcome c1_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 g(20240601);
    std::uniform_int_distribution<std::size_t> size(3, 12);
    std::size_t exact_checked = 0, exact_bad = 0, normal_checked = 0, normal_bad = 0;
    double exact_worst = 0, normal_worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = size(g);
        PairedScores p{averaged(g, n, 5), averaged(g, n, 5)};
        const auto auto_w = wilcoxon_one_sided(p);
        if (auto_w.all_zero) continue;
        const double oracle = wilcoxon_enumeration_oracle(p);

        const auto exact = wilcoxon_one_sided(p, WilcoxonMode::exact);
        const double e = std::abs(exact.p_value - oracle);
        ++exact_checked;
        exact_worst = std::max(exact_worst, e);
        if (e > 1e-12) ++exact_bad;

        if (auto_w.n_effective >= 10) {
            const auto normal = wilcoxon_one_sided(p, WilcoxonMode::normal);
            const double d = std::abs(normal.p_value - oracle);
            ++normal_checked;
            normal_worst = std::max(normal_worst, d);
            if (d > 0.01) ++normal_bad;
        }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = exact_bad == 0 && normal_bad == 0 && secs < 30;
    o.detail = "exact: " + std::to_string(exact_bad) + "/" + std::to_string(exact_checked) +
               " beyond 1e-12 (worst " + fmt("%.2e", exact_worst) + "); normal, n>=10: " +
               std::to_string(normal_bad) + "/" + std::to_string(normal_checked) + " beyond 0.01 (worst " +
               fmt("%.4f", normal_worst) + "); " + fmt("%.2f", secs) + " s";
    return o;
}

Outcome c2_known_values() {
    auto from_diffs = [](std::vector<double> d) {
        PairedScores p;
        for (double x : d) {
            p.original.push_back(3 + x);
            p.perturbed.push_back(3);
        }
        return p;
    };
    const auto w = wilcoxon_one_sided(from_diffs({1, 2, 3, 4, 5}));
    const auto z = wilcoxon_one_sided(from_diffs({0, 0, 0, 0}));
    const double d05 = discernment_score(0.05);
    Outcome o;
    o.pass = w.p_value == 0.03125 && z.all_zero && z.p_value == 1.0 && discernment_score(z.p_value) == 0.0 &&
             std::abs(d05 - 1.0) <= 1e-12;
    o.detail = "p([1..5]) = " + fmt("%.17g", w.p_value) + ", all-zero p = " + fmt("%g", z.p_value) +
               " D = " + fmt("%g", discernment_score(z.p_value)) + ", D(0.05) - 1 = " + fmt("%.3g", d05 - 1.0);
    return o;
}

Corpus qa_corpus(std::size_t n) {
    Corpus c;
    c.task = TaskKind::question_answering;
    for (std::size_t i = 0; i < n; ++i) {
        const auto s = std::to_string(i);
        c.datapoints.push_back({"q" + s, "What is item " + s + "?\nItem " + s + " is described in this paragraph.",
                                "Item " + s + " is the answer, explained in one sentence.", {}});
    }
    return c;
}

ProviderConfig mock_scorer(std::uint64_t seed, double penalty) {
    ProviderConfig p;
    p.name = "mock";
    p.model = "mock";
    p.kind = ProviderConfig::Kind::mock;
    p.max_concurrency = 8;
    p.mock.seed = seed;
    p.mock.penalty = penalty;
    return p;
}

VariantCorpus rewritten(const Corpus& c, const std::string& pid, const std::string& insert) {
    VariantCorpus v{pid, {}, {}};
    for (const auto& dp : c.datapoints) v.texts[dp.id] = insert + " " + dp.reference;
    return v;
}

Outcome c3_null_calibration() {
    const auto c = qa_corpus(100);
    const auto store = TemplateStore::builtin();
    const auto& tmpl = store.evaluation(TaskKind::question_answering, "answer_quality");
    // Different text, no defect marker: both variants share one score law.
    const auto original = original_variant(c);
    const auto other = rewritten(c, "null", "Indeed,");
    int hits = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        ChatClient client(mock_scorer(static_cast<std::uint64_t>(t), 1.0), std::nullopt);
        Diagnostics diag;
        const auto a = average_repeats(score_variant(original, c, tmpl, client, 5, diag));
        const auto b = average_repeats(score_variant(other, c, tmpl, client, 5, diag));
        if (wilcoxon_one_sided(pair_scores(a, b)).p_value < 0.05) ++hits;
    }
    const double rate = static_cast<double>(hits) / trials;
    return {rate >= 0.03 && rate <= 0.07, "fraction p < 0.05: " + fmt("%.3f", rate) + " (band [0.03, 0.07])"};
}

/// One simulated benchmark per trial on the built-in QA plan: shared
/// original, every perturbed variant carries the defect marker.
std::vector<DiscernmentResult> sensitivity_trials(double penalty, int trials) {
    const auto c = qa_corpus(100);
    const auto plan = builtin_plan("answer_eq");
    const auto store = TemplateStore::builtin();
    const auto& tmpl = store.evaluation(TaskKind::question_answering, "answer_quality");
    const std::vector<std::string> metrics{"answer_quality"};
    Diagnostics quiet;
    const auto ew = build_expert_weights(plan, std::nullopt, quiet);
    const auto weights = level_weights(plan);
    std::vector<DiscernmentResult> out;
    for (int t = 0; t < trials; ++t) {
        ChatClient client(mock_scorer(1000003ULL * static_cast<std::uint64_t>(t + 1), penalty), std::nullopt);
        Diagnostics diag;
        std::map<std::string, ScoreSet> orig{
            {"answer_quality", average_repeats(score_variant(original_variant(c), c, tmpl, client, 5, diag))}};
        std::vector<std::pair<std::string, std::map<std::string, ScoreSet>>> pert;
        for (const auto& s : plan.specs) {
            const auto v = rewritten(c, s.pid, "[[mock-defect]] " + s.pid);
            pert.emplace_back(s.pid, std::map<std::string, ScoreSet>{
                                         {"answer_quality", average_repeats(score_variant(v, c, tmpl, client, 5, diag))}});
        }
        const auto grid = wilcoxon_grid(orig, pert, metrics, {}, diag);
        out.push_back(aggregate_discernment(grid, ew, weights));
    }
    return out;
}

Outcome c4_sensitivity() {
    const int trials = 200;
    int strong = 0;
    double worst_min = 1e300;
    for (const auto& r : sensitivity_trials(0.5, trials)) {
        worst_min = std::min(worst_min, r.D_min);
        if (r.D_min > 1) ++strong;
    }
    int quiet = 0;
    double mean_avg = 0;
    for (const auto& r : sensitivity_trials(0.0, trials)) {
        if (r.D_avg < 0.5) ++quiet;
        mean_avg += r.D_avg / trials;
    }
    const double a = static_cast<double>(strong) / trials, b = static_cast<double>(quiet) / trials;
    Outcome o;
    o.pass = a >= 0.99 && b >= 0.95;
    o.detail = "penalty 0.5: every D > 1 in " + fmt("%.3f", a) + " of trials (need 0.99; lowest D_min " +
               fmt("%.2f", worst_min) + "); penalty 0: D_avg < 0.5 in " + fmt("%.3f", b) +
               " (need 0.95; mean D_avg " + fmt("%.3f", mean_avg) + ")";
    return o;
}

Outcome c5_response_style() {
    std::mt19937_64 g(5);
    const std::vector<std::string> metrics{"coherence", "consistency", "fluency"};
    const std::vector<std::string> pids{"a", "b", "c", "d"};
    PerturbationPlan plan{TaskKind::story_completion, {}};
    for (const auto& pid : pids) {
        plan.specs.push_back({pid, Level::character, Method::rule, Degree::minor, PerturbKind::delete_chars,
                              Magnitude{1, false}, {}});
    }
    Diagnostics diag;
    const auto ew = build_expert_weights(plan, std::nullopt, diag);
    const auto weights = level_weights(plan);

    auto make = [&](const std::string& pid, const std::string& m, const std::vector<double>& v) {
        ScoreSet s{pid, m, {}, {}};
        for (std::size_t i = 0; i < v.size(); ++i) {
            s.ids.push_back(std::to_string(i));
            s.scores.push_back(v[i]);
        }
        return s;
    };
    auto run = [&](const std::map<std::string, std::vector<double>>& orig,
                   const std::map<std::string, std::map<std::string, std::vector<double>>>& pert,
                   const std::function<double(double)>& f) {
        std::map<std::string, ScoreSet> o;
        for (const auto& [m, v] : orig) {
            std::vector<double> t;
            for (double x : v) t.push_back(f(x));
            o[m] = make("original", m, t);
        }
        std::vector<std::pair<std::string, std::map<std::string, ScoreSet>>> p;
        for (const auto& pid : pids) {
            std::map<std::string, ScoreSet> by;
            for (const auto& [m, v] : pert.at(pid)) {
                std::vector<double> t;
                for (double x : v) t.push_back(f(x));
                by[m] = make(pid, m, t);
            }
            p.emplace_back(pid, by);
        }
        Diagnostics d;
        const auto grid = wilcoxon_grid(o, p, metrics, {}, d);
        return std::make_pair(grid, aggregate_discernment(grid, ew, weights));
    };

    std::size_t compared = 0, differing = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = trial % 2 ? 100 : 20;
        std::map<std::string, std::vector<double>> orig;
        std::map<std::string, std::map<std::string, std::vector<double>>> pert;
        for (const auto& m : metrics) orig[m] = averaged(g, n, 5);
        for (const auto& pid : pids) {
            for (const auto& m : metrics) pert[pid][m] = averaged(g, n, 5);
        }
        const auto base = run(orig, pert, [](double x) { return x; });
        std::vector<std::function<double(double)>> transforms;
        for (double c : {-2.0, 0.7, 3.0}) transforms.push_back([c](double x) { return x + c; });
        for (double c : {0.5, 2.0}) transforms.push_back([c](double x) { return x * c; });
        for (const auto& f : transforms) {
            const auto other = run(orig, pert, f);
            for (std::size_t i = 0; i < pids.size(); ++i) {
                for (std::size_t j = 0; j < metrics.size(); ++j) {
                    ++compared;
                    if (other.first.cells[i][j].p_value != base.first.cells[i][j].p_value) ++differing;
                }
            }
            if (!(other.second == base.second)) ++differing;
        }
    }
    return {differing == 0, std::to_string(differing) + " differences over " + std::to_string(compared) +
                                " p-values and every D (5 transforms, 40 grids)"};
}

Outcome c6_expert_weights(const fs::path& source) {
    const auto w = expert_weights_from_votes({{"coherence", 4}, {"consistency", 1}, {"fluency", 5}},
                                             {"coherence", "consistency", "fluency"});
    const bool exact = w == std::vector<double>{0.4, 0.1, 0.5};

    auto cfg = load_config(source / "configs/mini_qa_offline.json");
    make_offline(cfg);
    cfg.output_dir = scratch("c6").string();
    Pipeline p(cfg);
    const auto r = p.run();
    std::size_t pids = 0, equal = 0;
    for (const auto& m : r.models) {
        for (std::size_t i = 0; i < m.discernment.D.size(); ++i) {
            ++pids;
            equal += m.discernment.D[i] == m.discernment.D_ew[i];
        }
        equal += 0;
    }
    const bool aggregates = std::all_of(r.models.begin(), r.models.end(), [](const auto& m) {
        return m.discernment.D_avg == m.discernment.D_ew_avg && m.discernment.D_min == m.discernment.D_ew_min;
    });
    return {exact && equal == pids && aggregates && pids > 0,
            std::string("votes {4,1,5} -> ") + (exact ? "[0.4, 0.1, 0.5]" : "mismatch") + "; QA run: D == D_ew for " +
                std::to_string(equal) + "/" + std::to_string(pids) + " pids"};
}

Outcome c7_hmp() {
    std::mt19937_64 g(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> m(1, 8);
    std::size_t bound_bad = 0, onehot_bad = 0;
    double worst = 0;
    for (int t = 0; t < 10000; ++t) {
        std::vector<double> p(static_cast<std::size_t>(m(g)));
        for (auto& x : p) x = std::max(1e-300, u(g));
        if (hmp(p) > *std::min_element(p.begin(), p.end())) ++bound_bad;
        const auto j = static_cast<std::size_t>(t) % p.size();
        std::vector<double> w(p.size(), 0.0);
        w[j] = 1.0;
        const double e = std::abs(hmp_weighted(p, w) - p[j]);
        worst = std::max(worst, e);
        if (e > 1e-15) ++onehot_bad;
    }
    return {bound_bad == 0 && onehot_bad == 0, "hmp > min p in " + std::to_string(bound_bad) +
                                                    "/10000; one-hot worst error " + fmt("%.1e", worst)};
}

Outcome c8_level_weights() {
    const auto plan = builtin_plan("summeval");
    const auto w = level_weights(plan);
    std::map<Level, double> sums;
    bool each = w.size() == 12;
    for (std::size_t i = 0; i < w.size(); ++i) {
        each = each && std::abs(w[i] - 1.0 / 12) <= 1e-15;
        sums[plan.specs[i].level] += w[i];
    }
    bool levels = sums.size() == 3;
    std::string detail = std::to_string(w.size()) + " specs, level sums";
    for (const auto& [l, s] : sums) {
        levels = levels && std::abs(s - 1.0 / 3) <= 1e-15;
        detail += " " + std::string(to_string(l)) + "=" + fmt("%.17g", s);
    }
    return {each && levels, detail};
}

Outcome c9_conservation(const fs::path& source) {
    const std::string para =
        "The council met on Monday. It approved the budget! Critics asked why? Dr. Lee disagreed. "
        "A vote followed. The mayor spoke last.";
    auto sorted_sentences = [](std::string_view t) {
        auto v = text::split_sentences(t);
        std::sort(v.begin(), v.end());
        return v;
    };
    const auto before = sorted_sentences(para);
    std::size_t alnum = 0;
    for (const auto& g : text::graphemes(para)) alnum += text::is_alnum_cluster(g);

    std::size_t shuffle_bad = 0, delete_bad = 0;
    for (std::int64_t s = 0; s < 1000; ++s) {
        auto r = RngStream::for_item(s, "sent_reorder", "c9");
        const auto k = s % 2 ? Magnitude::every() : Magnitude{2, false};
        if (sorted_sentences(shuffle_sentences(para, k, r)) != before) ++shuffle_bad;

        auto r2 = RngStream::for_item(s, "char_delete", "c9");
        const std::size_t k2 = 1 + static_cast<std::size_t>(s % 50);
        const auto out = delete_random_chars(para, k2, r2);
        std::size_t left = 0;
        for (const auto& g : text::graphemes(out)) left += text::is_alnum_cluster(g);
        const bool only_alnum = text::count_graphemes(out) == text::count_graphemes(para) - k2;
        if (left != alnum - k2 || !only_alnum) ++delete_bad;
    }

    // Whole rule-based pipeline: subset + every rule spec of the built-in
    // summarization plan, twice from scratch.
    auto corpus = load_corpus(source / "data/mini/summarization.jsonl", TaskKind::summarization);
    auto plan = builtin_plan("summeval");
    plan.specs.erase(std::remove_if(plan.specs.begin(), plan.specs.end(),
                                    [](const auto& s) { return s.method != Method::rule; }),
                     plan.specs.end());
    auto serialize = [&] {
        Diagnostics diag;
        const auto sub = select_subset(corpus, 15, 11);
        std::ostringstream out;
        for (const auto& v : apply_plan(sub, plan, 11, nullptr, TemplateStore::builtin(), diag)) {
            write_variant(v, sub, out);
        }
        return out.str();
    };
    const bool same = serialize() == serialize();
    return {shuffle_bad == 0 && delete_bad == 0 && same,
            "shuffle multiset violations " + std::to_string(shuffle_bad) + "/1000, deletion count violations " +
                std::to_string(delete_bad) + "/1000, rule pipeline (" + std::to_string(plan.specs.size()) +
                " specs) " + (same ? "byte-identical" : "differs") + " across runs"};
}

Outcome c10_end_to_end(const fs::path& source, const fs::path& cli) {
    const auto out = scratch("c10");
    const auto cmd = "\"" + cli.string() + "\" run --offline --config \"" +
                     (source / "configs/mini_offline.json").string() + "\" --out \"" + out.string() +
                     "\" > \"" + (out / "stdout.txt").string() + "\" 2>&1";
    const auto t0 = std::chrono::steady_clock::now();
    const int rc1 = std::system(cmd.c_str());
    const double secs = seconds_since(t0);
    const auto first = read_file(out / "report.json");
    const int rc2 = std::system(cmd.c_str());
    const auto second = read_file(out / "report.json");

    std::vector<std::string> problems;
    try {
        schema_check::Checker checker(nlohmann::json::parse(read_file(source / "docs/report.schema.json")));
        problems = checker.check(nlohmann::json::parse(first));
    } catch (const std::exception& e) {
        problems.push_back(e.what());
    }
    std::size_t upstream = 0;
    std::size_t pids = 0, metrics = 0;
    try {
        const auto log = nlohmann::json::parse(read_file(out / "run_log.json"));
        for (const auto& [k, v] : log["upstream_calls"].items()) upstream += v.get<std::size_t>();
        const auto rep = nlohmann::json::parse(first);
        pids = rep["results"][0]["perturbations"].size();
        metrics = rep["metadata"]["metrics"].size();
    } catch (const std::exception& e) {
        problems.push_back(e.what());
    }
    Outcome o;
    o.pass = rc1 == 0 && rc2 == 0 && secs < 60 && problems.empty() && !first.empty() && first == second &&
             upstream == 0 && pids == 4 && metrics == 2;
    o.detail = "first run " + fmt("%.2f", secs) + " s, " + std::to_string(pids) + " specs x " +
               std::to_string(metrics) + " metrics, schema " +
               (problems.empty() ? "valid" : "INVALID (" + problems.front() + ")") + ", second run " +
               (first == second ? "byte-identical" : "differs") + " with " + std::to_string(upstream) +
               " upstream calls";
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    int only = 0;
    std::string source = DISCERN_SOURCE_DIR;
    std::string cli = DISCERN_CLI_PATH;
    app.add_option("--only", only, "Run one criterion (1-10)")->check(CLI::Range(1, 10));
    app.add_option("--source", source, "Repository root");
    app.add_option("--cli", cli, "Path to the discern executable");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"W-test oracle equivalence", c1_oracle},
        {"known values", c2_known_values},
        {"null calibration", c3_null_calibration},
        {"sensitivity", c4_sensitivity},
        {"response-style invariance", c5_response_style},
        {"expert-weight fidelity", [&] { return c6_expert_weights(source); }},
        {"HMP properties", c7_hmp},
        {"level weights", c8_level_weights},
        {"perturbation conservation", [&] { return c9_conservation(source); }},
        {"offline end to end", [&] { return c10_end_to_end(source, cli); }},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only && static_cast<std::size_t>(only) != i + 1) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::printf("%s C%zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed ? 1 : 0;
}
