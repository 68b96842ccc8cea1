#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "discern/config.hpp"
#include "discern/diagnostics.hpp"
#include "discern/evaluate.hpp"
#include "discern/perturb.hpp"
#include "discern/report.hpp"
#include "discern/templates.hpp"

namespace discern {

/// Score sets of one model: [pid][metric], original included.
using ModelScores = std::map<std::string, std::map<std::string, ScoreSet>>;

/// Stage driver for one config. Each stage loads its content-addressed
/// artifact from <output_dir>/stages when present and computes (then
/// persists) it otherwise, so later stages and re-runs never repeat work.
/// Errors leave as StageError tagged with the failing stage.
class Pipeline {
public:
    explicit Pipeline(RunConfig cfg);

    const RunConfig& config() const { return cfg_; }
    const TemplateStore& templates() const { return templates_; }
    const PerturbationPlan& plan() const { return plan_; }

    const Corpus& subset();
    const std::vector<VariantCorpus>& variants();
    const ModelScores& scores(const std::string& model);
    BenchmarkReport analyze();

    /// For every test whose pair has at most 20 nonzero differences, the
    /// enumeration-oracle p next to the reported p.
    struct OracleRow {
        std::string model, pid, metric;
        std::size_t n_effective = 0;
        double p = 1;
        double oracle_p = 1;
    };
    std::vector<OracleRow> oracle_check();

    /// Writes report.json, scores.csv, chart.svg and run_log.json.
    BenchmarkReport run();

    struct StageLog {
        std::string stage;
        std::string key;
        bool reused = false;
    };
    const std::vector<StageLog>& stage_log() const { return stage_log_; }
    std::size_t upstream_calls() const;
    std::size_t cache_hits() const;

private:
    template <typename Fn>
    decltype(auto) stage(const std::string& name, Fn&& fn);

    std::string subset_key();
    std::string variants_key();
    std::string scores_key(const ProviderConfig& model);
    ChatClient& client_for(const ProviderConfig& profile, bool perturber);
    const ProviderConfig& model_profile(const std::string& name) const;
    RunMetadata metadata() const;
    std::vector<std::string> all_warnings() const;

    RunConfig cfg_;
    TemplateStore templates_;
    PerturbationPlan plan_;
    std::string corpus_sha_;

    std::optional<Corpus> subset_;
    std::optional<std::vector<VariantCorpus>> variants_;
    std::map<std::string, ModelScores> scores_;

    Diagnostics load_diag_, perturb_diag_;
    std::unique_ptr<Diagnostics> analyze_diag_;
    std::map<std::string, Diagnostics> evaluate_diag_;
    std::map<std::string, std::unique_ptr<ChatClient>> clients_;
    std::vector<StageLog> stage_log_;
};

/// Runs the enumeration-oracle self check used by `stats-selftest`; one
/// line per check. Returns true when every check passed.
bool stats_selftest(std::ostream& out);

/// Exit code for an exception escaping a command: Error::exit_code(), or 1.
int exit_code_for(const std::exception& e);

}  // namespace discern
