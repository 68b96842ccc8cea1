#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "discern/corpus.hpp"
#include "discern/provider.hpp"
#include "discern/stats.hpp"

namespace discern {

struct DatasetConfig {
    std::string path;
    TaskKind task = TaskKind::summarization;
    std::optional<std::pair<std::string, std::string>> language_pair;
    /// Keep only references with more than this many grapheme clusters.
    std::size_t min_reference_chars = 0;

    bool operator==(const DatasetConfig&) const = default;
};

/// One benchmark run. Relative paths resolve against `base_dir`, the
/// directory of the config file.
struct RunConfig {
    std::filesystem::path base_dir;
    DatasetConfig dataset;
    std::string plan;
    std::vector<ProviderConfig> models;
    std::optional<ProviderConfig> perturbation_provider;
    std::optional<std::string> expert_votes;
    std::int64_t seed = 0;
    std::size_t n = 100;
    std::size_t repeats = 5;
    std::optional<std::string> cache_dir;  // default: <output_dir>/cache
    std::string output_dir = "out";
    StatsOptions stats;
    std::optional<std::string> prompts_dir;
    /// Used by --offline for both the scorer and the perturber.
    MockConfig mock;

    std::filesystem::path resolve(const std::string& p) const;
    std::filesystem::path dataset_path() const { return resolve(dataset.path); }
    std::filesystem::path output_path() const { return resolve(output_dir); }
    std::filesystem::path cache_path() const;
    std::filesystem::path stages_path() const { return output_path() / "stages"; }
};

ProviderConfig provider_from_json(const nlohmann::json& j);
nlohmann::json provider_to_json(const ProviderConfig& p);
MockConfig mock_from_json(const nlohmann::json& j, MockConfig base = {});
nlohmann::json mock_to_json(const MockConfig& m);

/// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

/// SHA-256 of the canonical serialization, leaving out base_dir,
/// output_dir and cache_dir.
std::string config_hash(const RunConfig& cfg);

/// Replaces every model with a mock scorer (seed mixed with the model name)
/// and the perturbation provider with a mock perturber.
void make_offline(RunConfig& cfg);

/// Keeps only the named models, in the order given. Unknown names throw.
void select_models(RunConfig& cfg, const std::vector<std::string>& names);

/// Filesystem-safe form of a model name.
std::string model_dir_name(std::string_view name);

}  // namespace discern
