#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "discern/stats.hpp"

namespace discern {

inline constexpr int kReportSchemaVersion = 1;

/// Everything that determines a report. Wall-clock data lives in the
/// run log instead so identical runs give byte-identical reports.
struct RunMetadata {
    std::string config_hash;
    std::string dataset;
    TaskKind task = TaskKind::summarization;
    std::string plan_name;
    PerturbationPlan plan;
    std::vector<std::string> metrics;
    std::int64_t seed = 0;
    std::size_t n = 0;
    std::size_t repeats = 0;
    StatsOptions stats;
    std::string templates_fingerprint;
    std::map<std::string, std::string> versions;

    bool operator==(const RunMetadata&) const = default;
};

struct ModelResult {
    std::string model;
    DiscernmentResult discernment;
    /// [pid][metric] in plan and metric order.
    std::vector<std::vector<WilcoxonOutcome>> tests;
    /// Excluded datapoints per pid (perturbation failures).
    std::map<std::string, std::size_t> exclusions;

    bool operator==(const ModelResult&) const = default;
};

struct BenchmarkReport {
    int schema_version = kReportSchemaVersion;
    RunMetadata meta;
    std::vector<ModelResult> models;
    std::vector<std::string> warnings;

    bool operator==(const BenchmarkReport&) const = default;
};

nlohmann::json report_to_json(const BenchmarkReport& report);
BenchmarkReport report_from_json(const nlohmann::json& j);

/// Canonical text: key-sorted, two-space indent, trailing newline.
std::string canonical_report_text(const BenchmarkReport& report);

/// Per-model stats output ready for assembly.
struct ModelAnalysis {
    std::string model;
    PValueGrid grid;
    DiscernmentResult discernment;
    std::map<std::string, std::size_t> exclusions;
};

/// Checks that every model covers exactly the plan's pids (in plan order)
/// and the task's metrics; warnings are de-duplicated keeping first
/// occurrences. Throws StatsError("PidMismatch").
BenchmarkReport assemble_report(const std::vector<ModelAnalysis>& results, RunMetadata meta,
                                const std::vector<std::string>& warnings);

/// Long-format CSV: model,pid,metric,p,D,D_ew,weight. One row per
/// (model, pid); `metric` joins the task metrics with '+' and p is the
/// combined (HMP) p-value behind D.
std::string scores_csv(const BenchmarkReport& report);

/// Grouped bars (D_avg, D_min, D_ew_avg, D_ew_min) per model, one panel per
/// report, with a red reference line at D = 1 in every panel.
std::string chart_svg(const std::vector<BenchmarkReport>& panels);

/// Writes report.json, scores.csv and chart.svg; returns their paths.
std::vector<std::filesystem::path> write_outputs(const BenchmarkReport& report,
                                                 const std::filesystem::path& output_dir);

/// Writes `content` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace discern
