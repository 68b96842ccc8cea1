// Command-line front end: perturb, evaluate, analyze, report, run,
// stats-selftest. Exit codes: 0 ok, 2 config, 3 provider, 4 data, 5 stats.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "discern/error.hpp"
#include "discern/pipeline.hpp"

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::int64_t> seed;
    std::vector<std::string> models;
    bool offline = false;
    std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--config", o.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "Override the config seed");
    cmd->add_option("--model", o.models, "Restrict to this model (repeatable)");
    cmd->add_flag("--offline", o.offline, "Use the mock scorer and perturber instead of real endpoints");
    cmd->add_option("--out", o.out, "Override output_dir");
}

discern::RunConfig resolve_config(const CommonOptions& o) {
    auto cfg = discern::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    discern::select_models(cfg, o.models);
    if (o.offline) discern::make_offline(cfg);
    if (!o.out.empty()) {
        // --out is relative to the working directory, not the config file.
        cfg.output_dir = std::filesystem::absolute(o.out).lexically_normal().string();
    }
    return cfg;
}

void print_summary(const discern::BenchmarkReport& r) {
    std::printf("%-24s %8s %8s %9s %9s\n", "model", "D_avg", "D_min", "D_ew_avg", "D_ew_min");
    for (const auto& m : r.models) {
        const auto& d = m.discernment;
        std::printf("%-24s %8.3f %8.3f %9.3f %9.3f\n", m.model.c_str(), d.D_avg, d.D_min, d.D_ew_avg, d.D_ew_min);
    }
    if (!r.warnings.empty()) std::printf("%zu warning(s); see report.json\n", r.warnings.size());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discernment benchmark for LLM evaluators"};
    app.require_subcommand(1);

    CommonOptions perturb_o, evaluate_o, analyze_o, report_o, run_o;
    auto* perturb = app.add_subcommand("perturb", "Build the perturbed variant corpora");
    add_common(perturb, perturb_o);
    auto* evaluate = app.add_subcommand("evaluate", "Score every variant with every model");
    add_common(evaluate, evaluate_o);
    auto* analyze = app.add_subcommand("analyze", "Run the statistics on stored scores");
    add_common(analyze, analyze_o);
    bool oracle = false;
    analyze->add_flag("--oracle", oracle, "Also print enumeration-oracle p-values for small tests");
    auto* report = app.add_subcommand("report", "Write report.json, scores.csv and chart.svg");
    add_common(report, report_o);
    auto* run = app.add_subcommand("run", "All stages end to end");
    add_common(run, run_o);
    auto* selftest = app.add_subcommand("stats-selftest", "Check the W-test against the enumeration oracle");

    CLI11_PARSE(app, argc, argv);

    try {
        if (selftest->parsed()) return discern::stats_selftest(std::cout) ? 0 : 5;

        if (perturb->parsed()) {
            discern::Pipeline p(resolve_config(perturb_o));
            for (const auto& v : p.variants()) {
                std::printf("%-28s %4zu texts %4zu excluded\n", v.pid.c_str(), v.texts.size(), v.excluded.size());
            }
            return 0;
        }
        if (evaluate->parsed()) {
            discern::Pipeline p(resolve_config(evaluate_o));
            for (const auto& m : p.config().models) {
                std::size_t sets = 0;
                for (const auto& [pid, by_metric] : p.scores(m.name)) sets += by_metric.size();
                std::printf("%s: %zu score sets\n", m.name.c_str(), sets);
            }
            std::printf("upstream calls: %zu, cache hits: %zu\n", p.upstream_calls(), p.cache_hits());
            return 0;
        }
        if (analyze->parsed()) {
            discern::Pipeline p(resolve_config(analyze_o));
            const auto r = p.analyze();
            print_summary(r);
            if (oracle) {
                std::printf("\n%-16s %-24s %-16s %5s %12s %12s\n", "model", "pid", "metric", "n", "p", "oracle_p");
                for (const auto& row : p.oracle_check()) {
                    std::printf("%-16s %-24s %-16s %5zu %12.6g %12.6g\n", row.model.c_str(), row.pid.c_str(),
                                row.metric.c_str(), row.n_effective, row.p, row.oracle_p);
                }
            }
            return 0;
        }
        if (report->parsed()) {
            discern::Pipeline p(resolve_config(report_o));
            const auto r = p.analyze();
            for (const auto& f : discern::write_outputs(r, p.config().output_path())) std::cout << f.string() << '\n';
            return 0;
        }
        if (run->parsed()) {
            discern::Pipeline p(resolve_config(run_o));
            const auto r = p.run();
            print_summary(r);
            std::printf("outputs in %s (upstream calls: %zu, cache hits: %zu)\n",
                        p.config().output_path().string().c_str(), p.upstream_calls(), p.cache_hits());
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return discern::exit_code_for(e);
    }
    return 0;
}
