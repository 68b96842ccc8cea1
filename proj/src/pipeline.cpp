#include "discern/pipeline.hpp"

#include <cmath>
#include <ctime>
#include <fstream>
#include <ostream>
#include <sstream>

#include <unicode/uversion.h>

#include "discern/error.hpp"
#include "discern/hashing.hpp"
#include "discern/provider.hpp"
#include "discern/rng.hpp"

#ifndef DISCERN_VERSION
#define DISCERN_VERSION "0.0.0"
#endif

namespace discern {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string short_hash(const json& j) { return sha256_hex(j.dump()).substr(0, 16); }

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("Unreadable", "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> read_warnings(const fs::path& p) {
    if (!fs::exists(p)) return {};
    try {
        return json::parse(read_file(p)).get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw DataError("CorruptArtifact", "stage artifact " + p.string() + ": " + e.what());
    }
}

void write_warnings(const fs::path& p, const std::vector<std::string>& w) {
    write_file_atomic(p, json(w).dump(2) + "\n");
}

/// Builds a directory artifact in a scratch location, then renames it into
/// place so a half-written stage is never mistaken for a finished one.
template <typename Fn>
void write_dir_atomic(const fs::path& dir, Fn&& fill) {
    auto tmp = dir;
    tmp += ".partial";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    fill(tmp);
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    fs::rename(tmp, dir);
}

std::string iso_utc(std::chrono::system_clock::time_point t) {
    const auto tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json scoring_identity(const ProviderConfig& p) {
    // Fields that can change a reply; concurrency and timeouts cannot.
    auto j = provider_to_json(p);
    for (const char* k : {"max_concurrency", "max_retries", "timeout_ms", "backoff_base_ms", "api_key_env"}) j.erase(k);
    return j;
}

}  // namespace

template <typename Fn>
decltype(auto) Pipeline::stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e);
    } catch (const fs::filesystem_error& e) {
        throw StageError(name, DataError("IOError", e.what()));
    }
}

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)) {
    stage("config", [&] {
        templates_ = TemplateStore::builtin();
        if (cfg_.prompts_dir) {
            const auto dir = cfg_.resolve(*cfg_.prompts_dir);
            auto custom = TemplateStore::from_directory(dir);
            for (const auto& id : custom.ids()) templates_.add(custom.get(id));
        }
        plan_ = resolve_plan(cfg_.plan, cfg_.base_dir);
        if (plan_.task != cfg_.dataset.task) {
            throw ConfigError("plan '" + cfg_.plan + "' is for " + std::string(to_string(plan_.task)) +
                                  " but the dataset is " + std::string(to_string(cfg_.dataset.task)),
                              "PlanTaskMismatch");
        }
        validate_plan(plan_, &templates_);
        for (const auto& metric : metrics_for(cfg_.dataset.task)) templates_.evaluation(cfg_.dataset.task, metric);
        if (cfg_.expert_votes && !fs::exists(cfg_.resolve(*cfg_.expert_votes))) {
            throw ConfigError("expert vote file " + cfg_.resolve(*cfg_.expert_votes).string() + " does not exist",
                              "MissingFile");
        }
        return 0;
    });
}

std::string Pipeline::subset_key() {
    if (corpus_sha_.empty()) {
        const auto path = cfg_.dataset_path();
        if (!fs::is_regular_file(path)) {
            throw ConfigError("dataset " + path.string() + " does not exist", "MissingFile");
        }
        corpus_sha_ = sha256_hex(read_file(path));
    }
    const auto& lp = cfg_.dataset.language_pair;
    return short_hash({{"corpus", corpus_sha_},
                       {"task", to_string(cfg_.dataset.task)},
                       {"min_reference_chars", cfg_.dataset.min_reference_chars},
                       {"language_pair", lp ? json::array({lp->first, lp->second}) : json(nullptr)},
                       {"n", cfg_.n},
                       {"seed", cfg_.seed}});
}

const Corpus& Pipeline::subset() {
    if (subset_) return *subset_;
    return stage("load", [&]() -> const Corpus& {
        const auto key = subset_key();
        const auto file = cfg_.stages_path() / ("subset-" + key + ".jsonl");
        const auto warn_file = cfg_.stages_path() / ("subset-" + key + ".warnings.json");
        if (fs::exists(file)) {
            std::ifstream in(file, std::ios::binary);
            auto c = parse_corpus(in, cfg_.dataset.task, file.string());
            c.language_pair = cfg_.dataset.language_pair;
            subset_ = std::move(c);
            load_diag_.extend(read_warnings(warn_file));
            stage_log_.push_back({"load", key, true});
            return *subset_;
        }
        auto full = load_corpus(cfg_.dataset_path(), cfg_.dataset.task);
        full.language_pair = cfg_.dataset.language_pair;
        const auto before = full.size();
        if (cfg_.dataset.min_reference_chars > 0) {
            full = filter_min_reference_chars(full, cfg_.dataset.min_reference_chars);
            if (full.size() < before) {
                load_diag_.warn("load", std::to_string(before - full.size()) + " of " + std::to_string(before) +
                                            " datapoints have references of at most " +
                                            std::to_string(cfg_.dataset.min_reference_chars) +
                                            " characters and were removed");
            }
        }
        subset_ = select_subset(full, cfg_.n, cfg_.seed);
        fs::create_directories(cfg_.stages_path());
        std::ostringstream body;
        write_corpus(*subset_, body);
        write_warnings(warn_file, load_diag_.warnings());
        write_file_atomic(file, body.str());
        stage_log_.push_back({"load", key, false});
        return *subset_;
    });
}

std::string Pipeline::variants_key() {
    const bool has_llm = std::any_of(plan_.specs.begin(), plan_.specs.end(),
                                     [](const auto& s) { return s.method == Method::llm; });
    json perturber = nullptr;
    if (has_llm && cfg_.perturbation_provider) perturber = scoring_identity(*cfg_.perturbation_provider);
    return short_hash({{"subset", subset_key()},
                       {"plan", plan_to_json(plan_)},
                       {"seed", cfg_.seed},
                       {"perturber", perturber},
                       {"templates", templates_.fingerprint()}});
}

ChatClient& Pipeline::client_for(const ProviderConfig& profile, bool perturber) {
    auto& slot = clients_[(perturber ? "perturber:" : "") + profile.name];
    if (!slot) {
        Diagnostics* diag = perturber ? &perturb_diag_ : &evaluate_diag_[profile.name];
        slot = std::make_unique<ChatClient>(profile, cfg_.cache_path(), diag);
    }
    return *slot;
}

const std::vector<VariantCorpus>& Pipeline::variants() {
    if (variants_) return *variants_;
    const auto& corpus = subset();
    return stage("perturb", [&]() -> const std::vector<VariantCorpus>& {
        const auto key = variants_key();
        const auto dir = cfg_.stages_path() / ("variants-" + key);
        std::vector<std::string> pids{std::string(kOriginalPid)};
        for (const auto& s : plan_.specs) pids.push_back(s.pid);

        if (fs::is_directory(dir)) {
            std::vector<VariantCorpus> out;
            for (const auto& pid : pids) {
                const auto file = dir / (pid + ".jsonl");
                std::ifstream in(file, std::ios::binary);
                if (!in) throw DataError("CorruptArtifact", "missing stage artifact " + file.string());
                auto v = read_variant(in, file.string());
                check_variant(v, corpus);
                out.push_back(std::move(v));
            }
            perturb_diag_.extend(read_warnings(dir / "warnings.json"));
            variants_ = std::move(out);
            stage_log_.push_back({"perturb", key, true});
            return *variants_;
        }

        ChatClient* perturber = nullptr;
        const bool has_llm = std::any_of(plan_.specs.begin(), plan_.specs.end(),
                                         [](const auto& s) { return s.method == Method::llm; });
        if (has_llm && cfg_.perturbation_provider) perturber = &client_for(*cfg_.perturbation_provider, true);
        auto out = apply_plan(corpus, plan_, cfg_.seed, perturber, templates_, perturb_diag_);
        write_dir_atomic(dir, [&](const fs::path& tmp) {
            for (const auto& v : out) {
                std::ostringstream body;
                write_variant(v, corpus, body);
                write_file_atomic(tmp / (v.pid + ".jsonl"), body.str());
            }
            write_warnings(tmp / "warnings.json", perturb_diag_.warnings());
        });
        variants_ = std::move(out);
        stage_log_.push_back({"perturb", key, false});
        return *variants_;
    });
}

const ProviderConfig& Pipeline::model_profile(const std::string& name) const {
    for (const auto& m : cfg_.models) {
        if (m.name == name) return m;
    }
    throw ConfigError("unknown model '" + name + "'", "UnknownModel");
}

std::string Pipeline::scores_key(const ProviderConfig& model) {
    return short_hash({{"variants", variants_key()},
                       {"model", scoring_identity(model)},
                       {"repeats", cfg_.repeats},
                       {"templates", templates_.fingerprint()}});
}

const ModelScores& Pipeline::scores(const std::string& model) {
    if (auto it = scores_.find(model); it != scores_.end()) return it->second;
    const auto& profile = model_profile(model);
    const auto& vars = variants();
    const auto& corpus = subset();
    return stage("evaluate", [&]() -> const ModelScores& {
        const auto key = scores_key(profile);
        const auto dir = cfg_.stages_path() / ("scores-" + key) / model_dir_name(profile.name);
        const auto& metrics = metrics_for(corpus.task);
        auto& diag = evaluate_diag_[profile.name];
        ModelScores result;

        if (fs::is_directory(dir)) {
            for (const auto& v : vars) {
                for (const auto& metric : metrics) {
                    const auto& tmpl = templates_.evaluation(corpus.task, metric);
                    const auto file = dir / (v.pid + "." + metric + ".jsonl");
                    std::ifstream in(file, std::ios::binary);
                    if (!in) throw DataError("CorruptArtifact", "missing stage artifact " + file.string());
                    auto m = read_score_matrix(in, tmpl.scale_min, tmpl.scale_max, file.string());
                    result[v.pid][metric] = average_repeats(m);
                }
            }
            diag.extend(read_warnings(dir / "warnings.json"));
            stage_log_.push_back({"evaluate:" + profile.name, key, true});
            return scores_[model] = std::move(result);
        }

        auto& client = client_for(profile, false);
        std::vector<ScoreMatrix> matrices;
        for (const auto& v : vars) {
            for (const auto& metric : metrics) {
                const auto& tmpl = templates_.evaluation(corpus.task, metric);
                auto m = score_variant(v, corpus, tmpl, client, cfg_.repeats, diag);
                result[v.pid][metric] = average_repeats(m);
                matrices.push_back(std::move(m));
            }
        }
        write_dir_atomic(dir, [&](const fs::path& tmp) {
            for (const auto& m : matrices) {
                std::ostringstream body;
                write_score_matrix(m, body);
                write_file_atomic(tmp / (m.pid + "." + m.metric + ".jsonl"), body.str());
            }
            write_warnings(tmp / "warnings.json", diag.warnings());
        });
        stage_log_.push_back({"evaluate:" + profile.name, key, false});
        return scores_[model] = std::move(result);
    });
}

RunMetadata Pipeline::metadata() const {
    RunMetadata m;
    m.config_hash = config_hash(cfg_);
    m.dataset = cfg_.dataset.path;
    m.task = cfg_.dataset.task;
    m.plan_name = cfg_.plan;
    m.plan = plan_;
    m.metrics = metrics_for(cfg_.dataset.task);
    m.seed = cfg_.seed;
    m.n = subset_ ? subset_->size() : cfg_.n;
    m.repeats = cfg_.repeats;
    m.stats = cfg_.stats;
    m.templates_fingerprint = templates_.fingerprint();
    m.versions = {{"discern", DISCERN_VERSION},
                  {"icu", U_ICU_VERSION},
                  {"report_schema", std::to_string(kReportSchemaVersion)}};
    return m;
}

std::vector<std::string> Pipeline::all_warnings() const {
    std::vector<std::string> all = load_diag_.warnings();
    auto append = [&](const Diagnostics& d) {
        auto w = d.warnings();
        all.insert(all.end(), w.begin(), w.end());
    };
    append(perturb_diag_);
    for (const auto& m : cfg_.models) {
        if (auto it = evaluate_diag_.find(m.name); it != evaluate_diag_.end()) append(it->second);
    }
    if (analyze_diag_) append(*analyze_diag_);
    return all;
}

BenchmarkReport Pipeline::analyze() {
    const auto& vars = variants();
    for (const auto& m : cfg_.models) scores(m.name);
    return stage("analyze", [&] {
        analyze_diag_ = std::make_unique<Diagnostics>();
        std::optional<ExpertVotes> votes;
        std::string votes_sha;
        if (cfg_.expert_votes) {
            const auto path = cfg_.resolve(*cfg_.expert_votes);
            votes = load_expert_votes(path);
            votes_sha = sha256_hex(read_file(path));
        }
        const auto ew = build_expert_weights(plan_, votes, *analyze_diag_);
        const auto weights = level_weights(plan_);
        const auto& metrics = metrics_for(cfg_.dataset.task);

        std::map<std::string, std::size_t> exclusions;
        for (const auto& v : vars) {
            if (v.pid != kOriginalPid) exclusions[v.pid] = v.excluded.size();
        }

        std::vector<ModelAnalysis> results;
        json keys = json::array();
        for (const auto& profile : cfg_.models) {
            const auto& sc = scores(profile.name);
            keys.push_back(scores_key(profile));
            std::vector<std::pair<std::string, std::map<std::string, ScoreSet>>> perturbed;
            for (const auto& spec : plan_.specs) perturbed.emplace_back(spec.pid, sc.at(spec.pid));
            ModelAnalysis a;
            a.model = profile.name;
            a.grid = wilcoxon_grid(sc.at(std::string(kOriginalPid)), perturbed, metrics, cfg_.stats, *analyze_diag_);
            a.discernment = aggregate_discernment(a.grid, ew, weights, cfg_.stats.hmp);
            a.exclusions = exclusions;
            results.push_back(std::move(a));
        }
        auto report = assemble_report(results, metadata(), all_warnings());
        const auto key = short_hash({{"scores", keys},
                                     {"stats", report_to_json(report)["metadata"]["stats"]},
                                     {"votes", votes_sha}});
        write_file_atomic(cfg_.stages_path() / ("analysis-" + key + ".json"), canonical_report_text(report));
        stage_log_.push_back({"analyze", key, false});
        return report;
    });
}

std::vector<Pipeline::OracleRow> Pipeline::oracle_check() {
    std::vector<OracleRow> rows;
    const auto& metrics = metrics_for(cfg_.dataset.task);
    for (const auto& profile : cfg_.models) {
        const auto& sc = scores(profile.name);
        const auto& orig = sc.at(std::string(kOriginalPid));
        for (const auto& spec : plan_.specs) {
            for (const auto& metric : metrics) {
                const auto pair = pair_scores(orig.at(metric), sc.at(spec.pid).at(metric));
                if (pair.original.empty()) continue;
                const auto outcome = wilcoxon_one_sided(pair, cfg_.stats.mode, cfg_.stats.zero_method);
                if (outcome.n_effective == 0 || outcome.n_effective > 20) continue;
                rows.push_back({profile.name, spec.pid, metric, outcome.n_effective, outcome.p_value,
                                wilcoxon_enumeration_oracle(pair)});
            }
        }
    }
    return rows;
}

BenchmarkReport Pipeline::run() {
    const auto started = std::chrono::system_clock::now();
    const auto t0 = std::chrono::steady_clock::now();
    auto report = analyze();
    const auto outputs = stage("report", [&] { return write_outputs(report, cfg_.output_path()); });
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    json stages = json::array();
    for (const auto& s : stage_log_) stages.push_back({{"stage", s.stage}, {"key", s.key}, {"reused", s.reused}});
    json calls = json::object();
    json hits = json::object();
    for (const auto& [name, client] : clients_) {
        calls[name] = client->upstream_calls();
        hits[name] = client->cache_hits();
    }
    json files = json::array();
    for (const auto& p : outputs) files.push_back(p.filename().string());
    const json log{{"started_at", iso_utc(started)},
                   {"finished_at", iso_utc(std::chrono::system_clock::now())},
                   {"elapsed_seconds", std::round(elapsed * 1000.0) / 1000.0},
                   {"config_hash", report.meta.config_hash},
                   {"stages", stages},
                   {"upstream_calls", calls},
                   {"cache_hits", hits},
                   {"outputs", files}};
    stage("report", [&] {
        write_file_atomic(cfg_.output_path() / "run_log.json", log.dump(2) + "\n");
        return 0;
    });
    return report;
}

std::size_t Pipeline::upstream_calls() const {
    std::size_t n = 0;
    for (const auto& [_, c] : clients_) n += c->upstream_calls();
    return n;
}

std::size_t Pipeline::cache_hits() const {
    std::size_t n = 0;
    for (const auto& [_, c] : clients_) n += c->cache_hits();
    return n;
}

bool stats_selftest(std::ostream& out) {
    bool all_ok = true;
    auto check = [&](const std::string& name, bool ok, const std::string& detail = {}) {
        out << (ok ? "PASS " : "FAIL ") << name;
        if (!ok && !detail.empty()) out << " (" << detail << ")";
        out << '\n';
        all_ok = all_ok && ok;
    };
    auto pair_of = [](const std::vector<double>& d) {
        PairedScores p;
        for (double v : d) {
            p.original.push_back(v);
            p.perturbed.push_back(0.0);
        }
        return p;
    };

    const auto five = wilcoxon_one_sided(pair_of({1, 2, 3, 4, 5}));
    check("d=[1..5] exact p = 1/32", five.mode_used == WilcoxonMode::exact && five.p_value == 0.03125);
    check("oracle d=[1] = 1/2", wilcoxon_enumeration_oracle(pair_of({1})) == 0.5);
    check("oracle d=[1,-1] = 3/4", wilcoxon_enumeration_oracle(pair_of({1, -1})) == 0.75);
    check("oracle ten ties = 1/1024", wilcoxon_enumeration_oracle(pair_of(std::vector<double>(10, 1.0))) == 1.0 / 1024);
    check("all-zero differences give p = 1", wilcoxon_one_sided(pair_of({0, 0, 0})).p_value == 1.0);
    check("discernment(0.05) = 1", std::abs(discernment_score(0.05) - 1.0) <= 1e-12);
    check("hmp([0.01,0.5,0.04]) = 1/127", std::abs(hmp({0.01, 0.5, 0.04}) - 1.0 / 127) <= 1e-15);

    // Exact DP against enumeration on repeat-averaged integer scores.
    RngStream rng(stream_key(20240601, "selftest", "oracle"));
    double worst = 0;
    for (int t = 0; t < 300; ++t) {
        const auto n = 3 + rng.uniform_below(10);
        PairedScores p;
        for (std::size_t i = 0; i < n; ++i) {
            double a = 0, b = 0;
            for (int r = 0; r < 5; ++r) {
                a += static_cast<double>(1 + rng.uniform_below(5));
                b += static_cast<double>(1 + rng.uniform_below(5));
            }
            p.original.push_back(a / 5);
            p.perturbed.push_back(b / 5);
        }
        const auto exact = wilcoxon_one_sided(p, WilcoxonMode::exact);
        worst = std::max(worst, std::abs(exact.p_value - wilcoxon_enumeration_oracle(p)));
    }
    std::ostringstream detail;
    detail << "max |exact - oracle| = " << worst;
    check("exact path matches enumeration on 300 random pairs", worst <= 1e-12, detail.str());
    return all_ok;
}

int exit_code_for(const std::exception& e) {
    if (const auto* err = dynamic_cast<const Error*>(&e)) return err->exit_code();
    return 1;
}

}  // namespace discern
