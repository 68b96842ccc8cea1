#include "discern/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "discern/error.hpp"
#include "discern/hashing.hpp"
#include "discern/rng.hpp"

namespace discern {

using json = nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be an object", "InvalidConfig");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'", "InvalidConfig");
    }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    return it->get<T>();
}

std::size_t positive(const json& j, const char* key, std::size_t fallback, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    if (!it->is_number_integer() || it->get<long long>() < 1) {
        throw ConfigError(where + ": '" + key + "' must be a positive integer", "InvalidConfig");
    }
    return it->get<std::size_t>();
}

std::optional<std::string> opt_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::string& p) const {
    std::filesystem::path path(p);
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    return path.lexically_normal();
}

std::filesystem::path RunConfig::cache_path() const {
    return cache_dir ? resolve(*cache_dir) : output_path() / "cache";
}

MockConfig mock_from_json(const json& j, MockConfig m) {
    check_keys(j, {"mode", "seed", "scale_min", "scale_max", "weights", "penalty", "defect_markers", "marker"},
               "mock");
    if (auto mode = opt_string(j, "mode")) {
        if (*mode == "scorer") {
            m.mode = MockConfig::Mode::scorer;
        } else if (*mode == "perturber") {
            m.mode = MockConfig::Mode::perturber;
        } else {
            throw ConfigError("mock: mode must be 'scorer' or 'perturber'", "InvalidConfig");
        }
    }
    m.seed = get_or<std::uint64_t>(j, "seed", m.seed);
    m.scale_min = get_or<int>(j, "scale_min", m.scale_min);
    m.scale_max = get_or<int>(j, "scale_max", m.scale_max);
    m.weights = get_or<std::vector<double>>(j, "weights", m.weights);
    m.penalty = get_or<double>(j, "penalty", m.penalty);
    m.defect_markers = get_or<std::vector<std::string>>(j, "defect_markers", m.defect_markers);
    m.marker = get_or<std::string>(j, "marker", m.marker);
    if (m.scale_min >= m.scale_max) throw ConfigError("mock: scale_min must be below scale_max", "InvalidConfig");
    if (m.weights.size() != static_cast<std::size_t>(m.scale_max - m.scale_min + 1)) {
        throw ConfigError("mock: weights need one entry per scale point", "InvalidConfig");
    }
    double total = 0;
    for (double w : m.weights) {
        if (!(w >= 0)) throw ConfigError("mock: weights must be non-negative", "InvalidConfig");
        total += w;
    }
    if (!(total > 0)) throw ConfigError("mock: weights must not all be zero", "InvalidConfig");
    if (!(m.penalty >= 0)) throw ConfigError("mock: penalty must be non-negative", "InvalidConfig");
    return m;
}

json mock_to_json(const MockConfig& m) {
    return {{"mode", m.mode == MockConfig::Mode::scorer ? "scorer" : "perturber"},
            {"seed", m.seed},
            {"scale_min", m.scale_min},
            {"scale_max", m.scale_max},
            {"weights", m.weights},
            {"penalty", m.penalty},
            {"defect_markers", m.defect_markers},
            {"marker", m.marker}};
}

ProviderConfig provider_from_json(const json& j) {
    check_keys(j,
               {"name", "kind", "base_url", "api_key_env", "model", "max_concurrency", "max_retries", "timeout_ms",
                "backoff_base_ms", "extra", "mock"},
               "provider profile");
    try {
        ProviderConfig p;
        p.name = j.at("name").get<std::string>();
        if (p.name.empty()) throw ConfigError("provider profile: name must be non-empty", "InvalidConfig");
        const auto where = "provider '" + p.name + "'";
        const auto kind = get_or<std::string>(j, "kind", "openai_compatible");
        if (kind == "openai_compatible") {
            p.kind = ProviderConfig::Kind::openai_compatible;
        } else if (kind == "mock") {
            p.kind = ProviderConfig::Kind::mock;
        } else {
            throw ConfigError(where + ": kind must be 'openai_compatible' or 'mock'", "InvalidConfig");
        }
        p.base_url = get_or<std::string>(j, "base_url", "");
        p.api_key_env = get_or<std::string>(j, "api_key_env", "");
        p.model = get_or<std::string>(j, "model", p.name);
        p.max_concurrency = static_cast<int>(positive(j, "max_concurrency", 4, where));
        p.max_retries = get_or<int>(j, "max_retries", 3);
        if (p.max_retries < 0) throw ConfigError(where + ": max_retries must be >= 0", "InvalidConfig");
        p.timeout = std::chrono::milliseconds(positive(j, "timeout_ms", 60000, where));
        p.backoff_base = std::chrono::milliseconds(get_or<long long>(j, "backoff_base_ms", 500));
        p.extra = get_or<json>(j, "extra", json::object());
        if (!p.extra.is_object()) throw ConfigError(where + ": extra must be an object", "InvalidConfig");
        for (const char* reserved : {"model", "messages", "temperature"}) {
            if (p.extra.contains(reserved)) {
                throw ConfigError(where + ": extra may not override '" + reserved + "'", "InvalidConfig");
            }
        }
        if (auto it = j.find("mock"); it != j.end() && !it->is_null()) p.mock = mock_from_json(*it);
        if (p.kind == ProviderConfig::Kind::openai_compatible && p.base_url.empty()) {
            throw ConfigError(where + ": base_url is required", "InvalidConfig");
        }
        return p;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("provider profile: ") + e.what(), "InvalidConfig");
    }
}

json provider_to_json(const ProviderConfig& p) {
    return {{"name", p.name},
            {"kind", p.kind == ProviderConfig::Kind::mock ? "mock" : "openai_compatible"},
            {"base_url", p.base_url},
            {"api_key_env", p.api_key_env},
            {"model", p.model},
            {"max_concurrency", p.max_concurrency},
            {"max_retries", p.max_retries},
            {"timeout_ms", p.timeout.count()},
            {"backoff_base_ms", p.backoff_base.count()},
            {"extra", p.extra},
            {"mock", mock_to_json(p.mock)}};
}

RunConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
    check_keys(j,
               {"$schema", "description", "dataset", "plan", "models", "perturbation_provider", "expert_votes",
                "seed", "n", "repeats", "cache_dir", "output_dir", "stats", "prompts_dir", "mock"},
               "config");
    try {
        RunConfig c;
        c.base_dir = base_dir;

        const auto& d = j.at("dataset");
        check_keys(d, {"path", "task", "language_pair", "min_reference_chars"}, "dataset");
        c.dataset.path = d.at("path").get<std::string>();
        c.dataset.task = parse_task(d.at("task").get<std::string>());
        if (auto it = d.find("language_pair"); it != d.end() && !it->is_null()) {
            const auto lp = it->get<std::vector<std::string>>();
            if (lp.size() != 2) throw ConfigError("dataset: language_pair needs two entries", "InvalidConfig");
            c.dataset.language_pair = std::make_pair(lp[0], lp[1]);
        }
        c.dataset.min_reference_chars = get_or<std::size_t>(d, "min_reference_chars", 0);

        c.plan = j.at("plan").get<std::string>();
        if (c.plan.empty()) throw ConfigError("config: plan must be non-empty", "InvalidConfig");

        std::set<std::string> names;
        for (const auto& m : j.at("models")) {
            auto p = provider_from_json(m);
            if (!names.insert(p.name).second) {
                throw ConfigError("config: model '" + p.name + "' listed twice", "InvalidConfig");
            }
            c.models.push_back(std::move(p));
        }
        if (c.models.empty()) throw ConfigError("config: at least one model is required", "InvalidConfig");
        if (auto it = j.find("perturbation_provider"); it != j.end() && !it->is_null()) {
            c.perturbation_provider = provider_from_json(*it);
        }
        c.expert_votes = opt_string(j, "expert_votes");
        c.seed = get_or<std::int64_t>(j, "seed", 0);
        c.n = positive(j, "n", 100, "config");
        c.repeats = positive(j, "repeats", 5, "config");
        c.cache_dir = opt_string(j, "cache_dir");
        c.output_dir = get_or<std::string>(j, "output_dir", "out");
        c.prompts_dir = opt_string(j, "prompts_dir");
        if (auto it = j.find("stats"); it != j.end() && !it->is_null()) {
            check_keys(*it, {"mode", "hmp", "zero_method"}, "stats");
            c.stats.mode = parse_wilcoxon_mode(get_or<std::string>(*it, "mode", "auto"));
            c.stats.hmp = parse_hmp_variant(get_or<std::string>(*it, "hmp", "as_written"));
            c.stats.zero_method = parse_zero_method(get_or<std::string>(*it, "zero_method", "drop"));
        }
        if (auto it = j.find("mock"); it != j.end() && !it->is_null()) c.mock = mock_from_json(*it);
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what(), "InvalidConfig");
    }
}

json config_to_json(const RunConfig& c) {
    json dataset{{"path", c.dataset.path},
                 {"task", to_string(c.dataset.task)},
                 {"min_reference_chars", c.dataset.min_reference_chars}};
    dataset["language_pair"] = c.dataset.language_pair
                                   ? json::array({c.dataset.language_pair->first, c.dataset.language_pair->second})
                                   : json(nullptr);
    json models = json::array();
    for (const auto& m : c.models) models.push_back(provider_to_json(m));
    auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
    return {{"dataset", std::move(dataset)},
            {"plan", c.plan},
            {"models", std::move(models)},
            {"perturbation_provider", c.perturbation_provider ? provider_to_json(*c.perturbation_provider) : json(nullptr)},
            {"expert_votes", opt(c.expert_votes)},
            {"seed", c.seed},
            {"n", c.n},
            {"repeats", c.repeats},
            {"cache_dir", opt(c.cache_dir)},
            {"output_dir", c.output_dir},
            {"stats",
             {{"mode", to_string(c.stats.mode)},
              {"hmp", to_string(c.stats.hmp)},
              {"zero_method", to_string(c.stats.zero_method)}}},
            {"prompts_dir", opt(c.prompts_dir)},
            {"mock", mock_to_json(c.mock)}};
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string(), "MissingFile");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what(), "InvalidConfig");
    }
    return config_from_json(j, std::filesystem::absolute(path).parent_path());
}

std::string config_hash(const RunConfig& cfg) {
    // Where results are written does not change them.
    auto j = config_to_json(cfg);
    j.erase("output_dir");
    j.erase("cache_dir");
    return sha256_hex(j.dump());
}

void make_offline(RunConfig& cfg) {
    for (auto& m : cfg.models) {
        if (m.kind == ProviderConfig::Kind::mock) continue;
        m.kind = ProviderConfig::Kind::mock;
        m.mock = cfg.mock;
        m.mock.mode = MockConfig::Mode::scorer;
        // Distinct but reproducible noise per model.
        m.mock.seed = stream_key(static_cast<std::int64_t>(cfg.mock.seed), "offline", m.name);
    }
    if (!cfg.perturbation_provider) {
        ProviderConfig p;
        p.name = "offline-perturber";
        p.model = p.name;
        cfg.perturbation_provider = p;
    }
    auto& p = *cfg.perturbation_provider;
    if (p.kind != ProviderConfig::Kind::mock) {
        p.kind = ProviderConfig::Kind::mock;
        p.mock = cfg.mock;
    }
    p.mock.mode = MockConfig::Mode::perturber;
}

void select_models(RunConfig& cfg, const std::vector<std::string>& names) {
    if (names.empty()) return;
    std::vector<ProviderConfig> kept;
    for (const auto& n : names) {
        auto it = std::find_if(cfg.models.begin(), cfg.models.end(), [&](const auto& m) { return m.name == n; });
        if (it == cfg.models.end()) throw ConfigError("--model '" + n + "' is not in the config", "UnknownModel");
        if (std::none_of(kept.begin(), kept.end(), [&](const auto& m) { return m.name == n; })) kept.push_back(*it);
    }
    cfg.models = std::move(kept);
}

std::string model_dir_name(std::string_view name) {
    std::string out;
    for (char c : name) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        out.push_back(ok ? c : '_');
    }
    if (out.empty() || out == "." || out == "..") out = "_" + out;
    return out;
}

}  // namespace discern
