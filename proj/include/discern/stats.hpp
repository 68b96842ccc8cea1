#pragma once

// Paired one-sided Wilcoxon signed-rank tests, harmonic-mean p-value
// combination, and the discernment transform.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "discern/evaluate.hpp"
#include "discern/perturb.hpp"

namespace discern {

class Diagnostics;

enum class WilcoxonMode { automatic, exact, normal };
enum class ZeroMethod { drop, zero_split };
enum class HmpVariant { as_written, normalized };

std::string_view to_string(WilcoxonMode v);
std::string_view to_string(ZeroMethod v);
std::string_view to_string(HmpVariant v);
WilcoxonMode parse_wilcoxon_mode(std::string_view s);
ZeroMethod parse_zero_method(std::string_view s);
HmpVariant parse_hmp_variant(std::string_view s);

struct StatsOptions {
    WilcoxonMode mode = WilcoxonMode::automatic;
    HmpVariant hmp = HmpVariant::as_written;
    ZeroMethod zero_method = ZeroMethod::drop;

    bool operator==(const StatsOptions&) const = default;
};

struct PairedScores {
    std::vector<double> original;
    std::vector<double> perturbed;
};

/// Pairs two score sets over the same ids, dropping any datapoint where
/// either side is a hole. Throws StatsError("LabelMismatch") if the id
/// lists differ.
PairedScores pair_scores(const ScoreSet& original, const ScoreSet& perturbed);

struct WilcoxonOutcome {
    double statistic = 0;  // W+
    double p_value = 1;
    std::size_t n_effective = 0;
    WilcoxonMode mode_used = WilcoxonMode::exact;  // never automatic
    bool all_zero = false;
    std::optional<double> z_score;  // normal path only

    bool operator==(const WilcoxonOutcome&) const = default;
};

/// Tests H1: original scores exceed perturbed scores.
///
/// Differences d = original - perturbed. Two values closer than
/// 1e-9 * max|score| are treated as equal, both for zero differences and for
/// ties among |d|, so that adding a constant to both samples or rescaling
/// them cannot change the outcome through rounding.
///
/// Exact path: the null distribution of W+ over doubled midranks, by
/// dynamic programming. Normal path: tie-corrected z without continuity
/// correction. `automatic` picks exact when n_effective <= 25 and there are
/// neither ties nor zeros.
WilcoxonOutcome wilcoxon_one_sided(const PairedScores& pair, WilcoxonMode mode = WilcoxonMode::automatic,
                                   ZeroMethod zero_method = ZeroMethod::drop);

/// Exact p by enumerating all 2^n sign assignments (n <= 20 after dropping
/// zeros). Midranks are computed independently of wilcoxon_one_sided.
double wilcoxon_enumeration_oracle(const PairedScores& pair);

/// 1 / sum(1/p_j), without the 1/M numerator.
double hmp(const std::vector<double>& p_values);

/// 1 / sum(w_j/p_j); weights must be non-negative and sum to 1 (+-1e-9).
double hmp_weighted(const std::vector<double>& p_values, const std::vector<double>& weights);

/// log base 0.05 of p, with p clamped to >= 1e-300.
double discernment_score(double p);

/// w_j = votes_j / sum(votes) in `metrics` order. Metrics without votes get 0.
std::vector<double> expert_weights_from_votes(const std::map<std::string, double>& votes,
                                              const std::vector<std::string>& metrics);

/// Expert survey output: {"task": str, "votes": {pid: {metric: count}}}.
struct ExpertVotes {
    TaskKind task = TaskKind::summarization;
    std::map<std::string, std::map<std::string, double>> votes;
};

ExpertVotes parse_expert_votes(const nlohmann::json& j);
ExpertVotes load_expert_votes(const std::filesystem::path& path);

/// Per-pid weight rows over `metrics`.
struct ExpertWeights {
    std::vector<std::string> metrics;
    std::map<std::string, std::vector<double>> rows;
};

/// Builds weights for every pid of `plan`. Pids without votes (or no vote
/// file at all) get uniform 1/M with a warning.
ExpertWeights build_expert_weights(const PerturbationPlan& plan, const std::optional<ExpertVotes>& votes,
                                   Diagnostics& diag);

/// 1/(L * c_l) for a spec at level l, aligned with plan.specs.
std::vector<double> level_weights(const PerturbationPlan& plan);

struct PValueGrid {
    std::vector<std::string> pids;
    std::vector<std::string> metrics;
    std::vector<std::vector<WilcoxonOutcome>> cells;  // [pid][metric]
};

/// Runs one test per (pid, metric). `original` holds one score set per
/// metric; `perturbed[pid]` likewise.
PValueGrid wilcoxon_grid(const std::map<std::string, ScoreSet>& original,
                         const std::vector<std::pair<std::string, std::map<std::string, ScoreSet>>>& perturbed,
                         const std::vector<std::string>& metrics, const StatsOptions& options,
                         Diagnostics& diag);

struct DiscernmentResult {
    std::vector<std::string> pids;
    std::vector<double> p;     // combined, unweighted
    std::vector<double> p_ew;  // combined, expert-weighted
    std::vector<double> D;
    std::vector<double> D_ew;
    std::vector<double> weights;
    double D_avg = 0;
    double D_min = 0;
    double D_ew_avg = 0;
    double D_ew_min = 0;

    bool operator==(const DiscernmentResult&) const = default;
};

/// `weights` is aligned with grid.pids. D_min is the unweighted minimum.
DiscernmentResult aggregate_discernment(const PValueGrid& grid, const ExpertWeights& ew,
                                        const std::vector<double>& weights,
                                        HmpVariant variant = HmpVariant::as_written);

}  // namespace discern
