#include "discern/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "discern/diagnostics.hpp"
#include "discern/error.hpp"

namespace discern {

using json = nlohmann::json;

namespace {

constexpr double kRelTol = 1e-9;
constexpr double kPFloor = 1e-300;
constexpr std::size_t kAutoExactLimit = 25;
constexpr std::size_t kExactLimit = 400;
constexpr std::size_t kOracleLimit = 20;

double tolerance(const PairedScores& pair) {
    double m = 0;
    for (double v : pair.original) m = std::max(m, std::abs(v));
    for (double v : pair.perturbed) m = std::max(m, std::abs(v));
    return kRelTol * m;
}

void check_pair(const PairedScores& pair) {
    if (pair.original.size() != pair.perturbed.size()) {
        throw StatsError("LengthMismatch", "paired samples differ in length (" +
                                               std::to_string(pair.original.size()) + " vs " +
                                               std::to_string(pair.perturbed.size()) + ")");
    }
    if (pair.original.empty()) throw StatsError("EmptyInput", "paired samples are empty");
}

void check_p(double p) {
    if (!(p > 0.0 && p <= 1.0)) {
        throw StatsError("InvalidPValue", "p-value " + std::to_string(p) + " outside (0, 1]");
    }
}

struct Ranked {
    std::vector<double> rank;  // parallel to the input magnitudes
    std::vector<std::size_t> tie_sizes;
};

/// Midranks of `mag` (all >= 0). A tie group starts at its smallest member
/// and absorbs every value within `tol` of it.
Ranked midranks(const std::vector<double>& mag, double tol) {
    std::vector<std::size_t> order(mag.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return mag[a] < mag[b]; });
    Ranked r;
    r.rank.resize(mag.size());
    std::size_t s = 0;
    while (s < order.size()) {
        std::size_t e = s + 1;
        while (e < order.size() && mag[order[e]] - mag[order[s]] <= tol) ++e;
        const double mid = (static_cast<double>(s + 1) + static_cast<double>(e)) / 2.0;
        for (std::size_t k = s; k < e; ++k) r.rank[order[k]] = mid;
        if (e - s > 1) r.tie_sizes.push_back(e - s);
        s = e;
    }
    return r;
}

/// P(W+* >= observed) where each rank joins W+ with probability 1/2.
/// Ranks and the observed value are given in quarter units so midranks and
/// the half-rank credit of zero_split stay integral.
double exact_upper_tail(const std::vector<std::size_t>& quarter_ranks, std::size_t observed) {
    const std::size_t total = std::accumulate(quarter_ranks.begin(), quarter_ranks.end(), std::size_t{0});
    if (observed > total) return 0.0;
    std::vector<double> dist(total + 1, 0.0);
    dist[0] = 1.0;
    std::size_t reach = 0;
    for (std::size_t r : quarter_ranks) {
        reach += r;
        for (std::size_t s = reach; s >= r; --s) {
            dist[s] = 0.5 * dist[s] + 0.5 * dist[s - r];
            if (s == r) break;
        }
        for (std::size_t s = 0; s < std::min(r, reach + 1); ++s) dist[s] *= 0.5;
    }
    double tail = 0.0;
    for (std::size_t s = total + 1; s-- > observed;) tail += dist[s];
    return tail;
}

std::size_t quarters(double v) { return static_cast<std::size_t>(std::llround(v * 4.0)); }

}  // namespace

std::string_view to_string(WilcoxonMode v) {
    switch (v) {
        case WilcoxonMode::automatic: return "auto";
        case WilcoxonMode::exact: return "exact";
        case WilcoxonMode::normal: return "normal";
    }
    return "?";
}

std::string_view to_string(ZeroMethod v) { return v == ZeroMethod::drop ? "drop" : "zero_split"; }

std::string_view to_string(HmpVariant v) { return v == HmpVariant::as_written ? "as_written" : "normalized"; }

WilcoxonMode parse_wilcoxon_mode(std::string_view s) {
    if (s == "auto") return WilcoxonMode::automatic;
    if (s == "exact") return WilcoxonMode::exact;
    if (s == "normal") return WilcoxonMode::normal;
    throw ConfigError("unknown stats mode '" + std::string(s) + "' (auto, exact, normal)", "InvalidConfig");
}

ZeroMethod parse_zero_method(std::string_view s) {
    if (s == "drop") return ZeroMethod::drop;
    if (s == "zero_split" || s == "zero-split") return ZeroMethod::zero_split;
    throw ConfigError("unknown zero method '" + std::string(s) + "' (drop, zero_split)", "InvalidConfig");
}

HmpVariant parse_hmp_variant(std::string_view s) {
    if (s == "as_written") return HmpVariant::as_written;
    if (s == "normalized") return HmpVariant::normalized;
    throw ConfigError("unknown hmp variant '" + std::string(s) + "' (as_written, normalized)", "InvalidConfig");
}

PairedScores pair_scores(const ScoreSet& original, const ScoreSet& perturbed) {
    if (original.ids != perturbed.ids) {
        throw StatsError("LabelMismatch", "score sets " + original.pid + "/" + original.metric + " and " +
                                              perturbed.pid + "/" + perturbed.metric + " cover different ids");
    }
    PairedScores out;
    for (std::size_t i = 0; i < original.scores.size(); ++i) {
        if (!original.scores[i] || !perturbed.scores[i]) continue;
        out.original.push_back(*original.scores[i]);
        out.perturbed.push_back(*perturbed.scores[i]);
    }
    return out;
}

WilcoxonOutcome wilcoxon_one_sided(const PairedScores& pair, WilcoxonMode mode, ZeroMethod zero_method) {
    check_pair(pair);
    const double tol = tolerance(pair);

    std::vector<double> d;
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < pair.original.size(); ++i) {
        double di = pair.original[i] - pair.perturbed[i];
        if (std::abs(di) <= tol) {
            ++zeros;
            if (zero_method == ZeroMethod::drop) continue;
            di = 0.0;
        }
        d.push_back(di);
    }

    WilcoxonOutcome out;
    out.n_effective = d.size() - (zero_method == ZeroMethod::zero_split ? zeros : 0);
    if (out.n_effective == 0) {
        out.all_zero = true;
        out.p_value = 1.0;
        out.mode_used = mode == WilcoxonMode::normal ? WilcoxonMode::normal : WilcoxonMode::exact;
        return out;
    }

    std::vector<double> mag(d.size());
    std::transform(d.begin(), d.end(), mag.begin(), [](double v) { return std::abs(v); });
    const auto ranked = midranks(mag, tol);

    double w_plus = 0.0;
    double zero_rank_sq = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] > 0) {
            w_plus += ranked.rank[i];
        } else if (d[i] == 0.0) {
            w_plus += ranked.rank[i] / 2.0;
            zero_rank_sq += ranked.rank[i] * ranked.rank[i];
        }
    }
    out.statistic = w_plus;

    bool exact = mode == WilcoxonMode::exact;
    if (mode == WilcoxonMode::automatic) {
        exact = out.n_effective <= kAutoExactLimit && ranked.tie_sizes.empty() && zeros == 0;
    }
    if (exact && d.size() > kExactLimit) {
        throw StatsError("ExactTooLarge", "exact mode supports at most " + std::to_string(kExactLimit) +
                                              " ranked differences");
    }

    double p;
    if (exact) {
        out.mode_used = WilcoxonMode::exact;
        std::vector<std::size_t> q;
        std::size_t fixed = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (d[i] == 0.0) {
                fixed += quarters(ranked.rank[i] / 2.0);
            } else {
                q.push_back(quarters(ranked.rank[i]));
            }
        }
        const auto observed = quarters(w_plus);
        p = observed <= fixed ? 1.0 : exact_upper_tail(q, observed - fixed);
    } else {
        out.mode_used = WilcoxonMode::normal;
        const auto n = static_cast<double>(d.size());
        double tie_term = 0.0;
        for (auto t : ranked.tie_sizes) {
            const auto td = static_cast<double>(t);
            tie_term += td * td * td - td;
        }
        const double mean = n * (n + 1.0) / 4.0;
        const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0 - zero_rank_sq / 4.0;
        const double z = (w_plus - mean) / std::sqrt(var);
        out.z_score = z;
        p = 0.5 * std::erfc(z / std::sqrt(2.0));
    }
    out.p_value = std::clamp(p, kPFloor, 1.0);
    return out;
}

double wilcoxon_enumeration_oracle(const PairedScores& pair) {
    check_pair(pair);
    const double tol = tolerance(pair);
    std::vector<double> d;
    for (std::size_t i = 0; i < pair.original.size(); ++i) {
        const double di = pair.original[i] - pair.perturbed[i];
        if (std::abs(di) > tol) d.push_back(di);
    }
    const auto n = d.size();
    if (n == 0) return 1.0;
    if (n > kOracleLimit) {
        throw StatsError("OracleTooLarge", "enumeration oracle supports at most " + std::to_string(kOracleLimit) +
                                               " nonzero differences");
    }
    // rank = (#smaller) + (#within tol, self included, + 1) / 2
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t smaller = 0;
        std::size_t equal = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double diff = std::abs(d[j]) - std::abs(d[i]);
            if (std::abs(diff) <= tol) {
                ++equal;
            } else if (diff < 0) {
                ++smaller;
            }
        }
        rank[i] = static_cast<double>(smaller) + static_cast<double>(equal + 1) / 2.0;
    }
    double observed = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] > 0) observed += rank[i];
    }
    std::uint64_t hits = 0;
    const std::uint64_t patterns = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask >> i & 1U) w += rank[i];
        }
        if (w >= observed - 1e-9) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(patterns);
}

double hmp(const std::vector<double>& p_values) {
    if (p_values.empty()) throw StatsError("EmptyInput", "hmp of an empty vector");
    for (double p : p_values) check_p(p);
    // 1/sum(1/p) evaluated as r/sum(r/p), r = min p: the term for the
    // minimum is exactly 1, so the result can never exceed r.
    const double r = *std::min_element(p_values.begin(), p_values.end());
    double s = 0.0;
    for (double p : p_values) s += r / p;
    return r / s;
}

double hmp_weighted(const std::vector<double>& p_values, const std::vector<double>& weights) {
    if (p_values.empty()) throw StatsError("EmptyInput", "hmp of an empty vector");
    if (p_values.size() != weights.size()) {
        throw StatsError("LengthMismatch", "hmp_weighted: " + std::to_string(p_values.size()) + " p-values but " +
                                               std::to_string(weights.size()) + " weights");
    }
    double wsum = 0.0;
    double r = 1.0;
    for (std::size_t j = 0; j < p_values.size(); ++j) {
        check_p(p_values[j]);
        if (!(weights[j] >= 0.0)) throw StatsError("InvalidWeights", "negative expert weight");
        wsum += weights[j];
        if (weights[j] > 0.0) r = std::min(r, p_values[j]);
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
        throw StatsError("InvalidWeights", "expert weights sum to " + std::to_string(wsum) + ", not 1");
    }
    double s = 0.0;
    for (std::size_t j = 0; j < p_values.size(); ++j) {
        if (weights[j] > 0.0) s += weights[j] * (r / p_values[j]);
    }
    return std::min(1.0, r / s);
}

double discernment_score(double p) {
    check_p(p);
    if (p == 1.0) return 0.0;
    return std::log(std::max(p, kPFloor)) / std::log(0.05);
}

std::vector<double> expert_weights_from_votes(const std::map<std::string, double>& votes,
                                              const std::vector<std::string>& metrics) {
    double total = 0.0;
    for (const auto& [metric, count] : votes) {
        if (std::find(metrics.begin(), metrics.end(), metric) == metrics.end()) {
            throw StatsError("UnknownMetric", "votes name metric '" + metric + "' which the task does not use");
        }
        if (!(count >= 0.0)) throw StatsError("InvalidVotes", "vote count for '" + metric + "' is negative");
        total += count;
    }
    if (!(total > 0.0)) throw StatsError("InvalidVotes", "all vote counts are zero");
    std::vector<double> w;
    w.reserve(metrics.size());
    for (const auto& m : metrics) {
        auto it = votes.find(m);
        w.push_back(it == votes.end() ? 0.0 : it->second / total);
    }
    return w;
}

ExpertVotes parse_expert_votes(const json& j) {
    try {
        ExpertVotes v;
        v.task = parse_task(j.at("task").get<std::string>());
        for (const auto& [pid, row] : j.at("votes").items()) {
            auto& dst = v.votes[pid];
            for (const auto& [metric, count] : row.items()) dst[metric] = count.get<double>();
        }
        return v;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed expert vote file: ") + e.what(), "InvalidVotes");
    }
}

ExpertVotes load_expert_votes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read expert vote file " + path.string(), "MissingFile");
    try {
        return parse_expert_votes(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ConfigError("expert vote file " + path.string() + ": " + e.what(), "InvalidVotes");
    }
}

ExpertWeights build_expert_weights(const PerturbationPlan& plan, const std::optional<ExpertVotes>& votes,
                                   Diagnostics& diag) {
    ExpertWeights ew;
    ew.metrics = metrics_for(plan.task);
    const auto m = ew.metrics.size();
    const std::vector<double> uniform(m, 1.0 / static_cast<double>(m));
    if (!votes) {
        diag.warn("analyze", "no expert votes configured; expert weights are uniform");
        for (const auto& spec : plan.specs) ew.rows[spec.pid] = uniform;
        return ew;
    }
    if (votes->task != plan.task) {
        throw ConfigError("expert votes are for task " + std::string(to_string(votes->task)) + ", plan is for " +
                              std::string(to_string(plan.task)),
                          "InvalidVotes");
    }
    std::set<std::string> pids;
    for (const auto& spec : plan.specs) {
        pids.insert(spec.pid);
        auto it = votes->votes.find(spec.pid);
        if (it == votes->votes.end()) {
            diag.warn("analyze", "no expert votes for " + spec.pid + "; using uniform weights");
            ew.rows[spec.pid] = uniform;
        } else {
            ew.rows[spec.pid] = expert_weights_from_votes(it->second, ew.metrics);
        }
    }
    for (const auto& [pid, _] : votes->votes) {
        if (!pids.count(pid)) diag.warn("analyze", "expert votes for unknown pid " + pid + " ignored");
    }
    return ew;
}

std::vector<double> level_weights(const PerturbationPlan& plan) {
    if (plan.specs.empty()) throw StatsError("EmptyPlan", "level weights need at least one perturbation");
    std::map<Level, std::size_t> counts;
    for (const auto& s : plan.specs) ++counts[s.level];
    const auto levels = counts.size();
    std::vector<double> w;
    w.reserve(plan.specs.size());
    for (const auto& s : plan.specs) w.push_back(1.0 / static_cast<double>(levels * counts[s.level]));
    return w;
}

PValueGrid wilcoxon_grid(const std::map<std::string, ScoreSet>& original,
                         const std::vector<std::pair<std::string, std::map<std::string, ScoreSet>>>& perturbed,
                         const std::vector<std::string>& metrics, const StatsOptions& options,
                         Diagnostics& diag) {
    PValueGrid grid;
    grid.metrics = metrics;
    for (const auto& [pid, sets] : perturbed) {
        grid.pids.push_back(pid);
        auto& row = grid.cells.emplace_back();
        for (const auto& metric : metrics) {
            auto o = original.find(metric);
            auto s = sets.find(metric);
            if (o == original.end() || s == sets.end()) {
                throw StatsError("LabelMismatch", "no scores for " + pid + "/" + metric);
            }
            const auto pair = pair_scores(o->second, s->second);
            if (pair.original.empty()) {
                diag.warn("analyze", pid + "/" + metric + ": no paired datapoints; p set to 1");
                WilcoxonOutcome none;
                none.mode_used = options.mode == WilcoxonMode::normal ? WilcoxonMode::normal : WilcoxonMode::exact;
                row.push_back(none);
                continue;
            }
            auto outcome = wilcoxon_one_sided(pair, options.mode, options.zero_method);
            if (outcome.all_zero) {
                diag.warn("analyze", pid + "/" + metric + ": all paired differences are zero; p = 1");
            }
            row.push_back(outcome);
        }
    }
    return grid;
}

DiscernmentResult aggregate_discernment(const PValueGrid& grid, const ExpertWeights& ew,
                                        const std::vector<double>& weights, HmpVariant variant) {
    if (grid.pids.empty()) throw StatsError("EmptyPlan", "no perturbations to aggregate");
    if (weights.size() != grid.pids.size()) {
        throw StatsError("LabelMismatch", "level weights do not match the perturbation list");
    }
    if (ew.metrics != grid.metrics) throw StatsError("LabelMismatch", "expert weights use a different metric list");
    DiscernmentResult r;
    r.pids = grid.pids;
    r.weights = weights;
    const auto m = grid.metrics.size();
    const std::vector<double> uniform(m, 1.0 / static_cast<double>(m));
    for (std::size_t i = 0; i < grid.pids.size(); ++i) {
        auto it = ew.rows.find(grid.pids[i]);
        if (it == ew.rows.end()) throw StatsError("LabelMismatch", "no expert weights for " + grid.pids[i]);
        std::vector<double> ps;
        for (const auto& c : grid.cells[i]) ps.push_back(c.p_value);
        const double p = variant == HmpVariant::as_written ? hmp(ps) : hmp_weighted(ps, uniform);
        const double p_ew = hmp_weighted(ps, it->second);
        r.p.push_back(p);
        r.p_ew.push_back(p_ew);
        r.D.push_back(discernment_score(p));
        r.D_ew.push_back(discernment_score(p_ew));
    }
    for (std::size_t i = 0; i < r.pids.size(); ++i) {
        r.D_avg += r.weights[i] * r.D[i];
        r.D_ew_avg += r.weights[i] * r.D_ew[i];
    }
    r.D_min = *std::min_element(r.D.begin(), r.D.end());
    r.D_ew_min = *std::min_element(r.D_ew.begin(), r.D_ew.end());
    // A convex combination cannot fall below its minimum; undo rounding drift.
    r.D_avg = std::max(r.D_avg, r.D_min);
    r.D_ew_avg = std::max(r.D_ew_avg, r.D_ew_min);
    return r;
}

}  // namespace discern
