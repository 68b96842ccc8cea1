#include "discern/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "discern/diagnostics.hpp"
#include "discern/error.hpp"

namespace discern {

using json = nlohmann::json;

namespace {

json outcome_to_json(const WilcoxonOutcome& o, const std::string& metric) {
    json j{{"metric", metric},
           {"statistic", o.statistic},
           {"p_value", o.p_value},
           {"n_effective", o.n_effective},
           {"mode_used", to_string(o.mode_used)},
           {"all_zero", o.all_zero}};
    j["z_score"] = o.z_score ? json(*o.z_score) : json(nullptr);
    return j;
}

WilcoxonOutcome outcome_from_json(const json& j) {
    WilcoxonOutcome o;
    o.statistic = j.at("statistic").get<double>();
    o.p_value = j.at("p_value").get<double>();
    o.n_effective = j.at("n_effective").get<std::size_t>();
    o.mode_used = parse_wilcoxon_mode(j.at("mode_used").get<std::string>());
    o.all_zero = j.at("all_zero").get<bool>();
    if (auto it = j.find("z_score"); it != j.end() && !it->is_null()) o.z_score = it->get<double>();
    return o;
}

std::string number(double v) { return json(v).dump(); }

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace

json report_to_json(const BenchmarkReport& report) {
    const auto& m = report.meta;
    json meta{{"config_hash", m.config_hash},
              {"dataset", m.dataset},
              {"task", to_string(m.task)},
              {"plan_name", m.plan_name},
              {"plan", plan_to_json(m.plan)},
              {"metrics", m.metrics},
              {"seed", m.seed},
              {"n", m.n},
              {"repeats", m.repeats},
              {"stats",
               {{"mode", to_string(m.stats.mode)},
                {"hmp", to_string(m.stats.hmp)},
                {"zero_method", to_string(m.stats.zero_method)}}},
              {"templates_fingerprint", m.templates_fingerprint},
              {"versions", m.versions}};

    json results = json::array();
    for (const auto& mr : report.models) {
        const auto& d = mr.discernment;
        json perts = json::array();
        for (std::size_t i = 0; i < d.pids.size(); ++i) {
            json tests = json::array();
            for (std::size_t k = 0; k < mr.tests[i].size(); ++k) {
                tests.push_back(outcome_to_json(mr.tests[i][k], m.metrics.at(k)));
            }
            const auto ex = mr.exclusions.find(d.pids[i]);
            perts.push_back({{"pid", d.pids[i]},
                             {"weight", d.weights[i]},
                             {"p", d.p[i]},
                             {"p_ew", d.p_ew[i]},
                             {"D", d.D[i]},
                             {"D_ew", d.D_ew[i]},
                             {"excluded", ex == mr.exclusions.end() ? 0 : ex->second},
                             {"tests", std::move(tests)}});
        }
        results.push_back({{"model", mr.model},
                           {"aggregates",
                            {{"D_avg", d.D_avg}, {"D_min", d.D_min}, {"D_ew_avg", d.D_ew_avg}, {"D_ew_min", d.D_ew_min}}},
                           {"perturbations", std::move(perts)}});
    }
    return {{"schema_version", report.schema_version},
            {"metadata", std::move(meta)},
            {"results", std::move(results)},
            {"warnings", report.warnings}};
}

BenchmarkReport report_from_json(const json& j) {
    try {
        BenchmarkReport r;
        r.schema_version = j.at("schema_version").get<int>();
        if (r.schema_version != kReportSchemaVersion) {
            throw ConfigError("unsupported report schema_version " + std::to_string(r.schema_version),
                              "InvalidReport");
        }
        const auto& mj = j.at("metadata");
        auto& m = r.meta;
        m.config_hash = mj.at("config_hash").get<std::string>();
        m.dataset = mj.at("dataset").get<std::string>();
        m.task = parse_task(mj.at("task").get<std::string>());
        m.plan_name = mj.at("plan_name").get<std::string>();
        m.plan = plan_from_json(mj.at("plan"));
        m.metrics = mj.at("metrics").get<std::vector<std::string>>();
        m.seed = mj.at("seed").get<std::int64_t>();
        m.n = mj.at("n").get<std::size_t>();
        m.repeats = mj.at("repeats").get<std::size_t>();
        const auto& sj = mj.at("stats");
        m.stats.mode = parse_wilcoxon_mode(sj.at("mode").get<std::string>());
        m.stats.hmp = parse_hmp_variant(sj.at("hmp").get<std::string>());
        m.stats.zero_method = parse_zero_method(sj.at("zero_method").get<std::string>());
        m.templates_fingerprint = mj.at("templates_fingerprint").get<std::string>();
        m.versions = mj.at("versions").get<std::map<std::string, std::string>>();

        for (const auto& rj : j.at("results")) {
            ModelResult mr;
            mr.model = rj.at("model").get<std::string>();
            auto& d = mr.discernment;
            const auto& a = rj.at("aggregates");
            d.D_avg = a.at("D_avg").get<double>();
            d.D_min = a.at("D_min").get<double>();
            d.D_ew_avg = a.at("D_ew_avg").get<double>();
            d.D_ew_min = a.at("D_ew_min").get<double>();
            for (const auto& pj : rj.at("perturbations")) {
                const auto pid = pj.at("pid").get<std::string>();
                d.pids.push_back(pid);
                d.weights.push_back(pj.at("weight").get<double>());
                d.p.push_back(pj.at("p").get<double>());
                d.p_ew.push_back(pj.at("p_ew").get<double>());
                d.D.push_back(pj.at("D").get<double>());
                d.D_ew.push_back(pj.at("D_ew").get<double>());
                mr.exclusions[pid] = pj.at("excluded").get<std::size_t>();
                auto& row = mr.tests.emplace_back();
                for (const auto& tj : pj.at("tests")) row.push_back(outcome_from_json(tj));
            }
            r.models.push_back(std::move(mr));
        }
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        return r;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed report: ") + e.what(), "InvalidReport");
    }
}

std::string canonical_report_text(const BenchmarkReport& report) { return report_to_json(report).dump(2) + "\n"; }

BenchmarkReport assemble_report(const std::vector<ModelAnalysis>& results, RunMetadata meta,
                                const std::vector<std::string>& warnings) {
    std::vector<std::string> plan_pids;
    for (const auto& s : meta.plan.specs) plan_pids.push_back(s.pid);
    BenchmarkReport r;
    for (const auto& a : results) {
        if (a.discernment.pids != plan_pids || a.grid.pids != plan_pids) {
            throw StatsError("PidMismatch", "results for model '" + a.model + "' do not cover the plan's perturbations");
        }
        if (a.grid.metrics != meta.metrics) {
            throw StatsError("PidMismatch", "results for model '" + a.model + "' use a different metric list");
        }
        ModelResult mr;
        mr.model = a.model;
        mr.discernment = a.discernment;
        mr.tests = a.grid.cells;
        for (const auto& pid : plan_pids) {
            auto it = a.exclusions.find(pid);
            mr.exclusions[pid] = it == a.exclusions.end() ? 0 : it->second;
        }
        r.models.push_back(std::move(mr));
    }
    std::set<std::string> names;
    for (const auto& mr : r.models) {
        if (!names.insert(mr.model).second) throw ConfigError("model '" + mr.model + "' listed twice", "DuplicateModel");
    }
    r.meta = std::move(meta);
    r.warnings = dedupe_warnings(warnings);
    return r;
}

std::string scores_csv(const BenchmarkReport& report) {
    std::string metric;
    for (const auto& m : report.meta.metrics) {
        if (!metric.empty()) metric += '+';
        metric += m;
    }
    std::ostringstream out;
    out << "model,pid,metric,p,D,D_ew,weight\n";
    auto field = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    };
    for (const auto& mr : report.models) {
        const auto& d = mr.discernment;
        for (std::size_t i = 0; i < d.pids.size(); ++i) {
            out << field(mr.model) << ',' << field(d.pids[i]) << ',' << field(metric) << ',' << number(d.p[i]) << ','
                << number(d.D[i]) << ',' << number(d.D_ew[i]) << ',' << number(d.weights[i]) << '\n';
        }
    }
    return out.str();
}

std::string chart_svg(const std::vector<BenchmarkReport>& panels) {
    constexpr double kBar = 18, kGroupGap = 28, kLeft = 56, kTop = 64, kPlotH = 220, kBottom = 56, kRight = 24;
    const std::array<const char*, 4> names{"D_avg", "D_min", "D_ew_avg", "D_ew_min"};
    const std::array<const char*, 4> colors{"#4c72b0", "#55a868", "#8172b2", "#ccb974"};

    double width = 0;
    std::vector<double> panel_w;
    for (const auto& r : panels) {
        const double groups = std::max<double>(1, static_cast<double>(r.models.size()));
        panel_w.push_back(std::max(320.0, kLeft + kRight + groups * (4 * kBar + kGroupGap) + kGroupGap));
        width += panel_w.back();
    }
    width = std::max(width, 400.0);  // room for the legend
    const double height = kTop + kPlotH + kBottom;

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(width, 0) << "\" height=\""
      << fixed(height, 0) << "\" viewBox=\"0 0 " << fixed(width, 0) << ' ' << fixed(height, 0)
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t k = 0; k < names.size(); ++k) {
        const double x = 12 + static_cast<double>(k) * 92;
        s << "<rect x=\"" << fixed(x, 0) << "\" y=\"8\" width=\"10\" height=\"10\" fill=\"" << colors[k] << "\"/>"
          << "<text x=\"" << fixed(x + 14, 0) << "\" y=\"17\">" << names[k] << "</text>\n";
    }

    double x0 = 0;
    for (std::size_t pi = 0; pi < panels.size(); ++pi) {
        const auto& r = panels[pi];
        double ymax = 1.0;
        for (const auto& mr : r.models) {
            const auto& d = mr.discernment;
            ymax = std::max({ymax, d.D_avg, d.D_min, d.D_ew_avg, d.D_ew_min});
        }
        ymax = std::ceil(ymax * 1.1 * 2.0) / 2.0;
        const auto ypix = [&](double v) { return kTop + kPlotH * (1.0 - std::min(v, ymax) / ymax); };
        const double plot_x = x0 + kLeft;
        const double plot_w = panel_w[pi] - kLeft - kRight;

        s << "<g class=\"panel\">\n";
        s << "<text x=\"" << fixed(plot_x + plot_w / 2, 1) << "\" y=\"40\" text-anchor=\"middle\" font-size=\"13\">"
          << xml_escape(r.meta.dataset) << " (" << to_string(r.meta.task) << ")</text>\n";
        s << "<line x1=\"" << fixed(plot_x, 1) << "\" y1=\"" << fixed(kTop, 1) << "\" x2=\"" << fixed(plot_x, 1)
          << "\" y2=\"" << fixed(kTop + kPlotH, 1) << "\" stroke=\"black\"/>\n";
        s << "<line x1=\"" << fixed(plot_x, 1) << "\" y1=\"" << fixed(kTop + kPlotH, 1) << "\" x2=\""
          << fixed(plot_x + plot_w, 1) << "\" y2=\"" << fixed(kTop + kPlotH, 1) << "\" stroke=\"black\"/>\n";
        const int ticks = 5;
        for (int t = 0; t <= ticks; ++t) {
            const double v = ymax * t / ticks;
            s << "<text x=\"" << fixed(plot_x - 6, 1) << "\" y=\"" << fixed(ypix(v) + 4, 1)
              << "\" text-anchor=\"end\">" << fixed(v, 1) << "</text>\n";
        }
        s << "<text transform=\"translate(" << fixed(x0 + 16, 1) << ' ' << fixed(kTop + kPlotH / 2, 1)
          << ") rotate(-90)\" text-anchor=\"middle\">D</text>\n";

        for (std::size_t mi = 0; mi < r.models.size(); ++mi) {
            const auto& d = r.models[mi].discernment;
            const std::array<double, 4> vals{d.D_avg, d.D_min, d.D_ew_avg, d.D_ew_min};
            const double gx = plot_x + kGroupGap + static_cast<double>(mi) * (4 * kBar + kGroupGap);
            for (std::size_t k = 0; k < vals.size(); ++k) {
                const double y = ypix(vals[k]);
                s << "<rect class=\"bar\" data-metric=\"" << names[k] << "\" x=\"" << fixed(gx + static_cast<double>(k) * kBar, 1)
                  << "\" y=\"" << fixed(y, 2) << "\" width=\"" << fixed(kBar - 2, 1) << "\" height=\""
                  << fixed(kTop + kPlotH - y, 2) << "\" fill=\"" << colors[k] << "\"><title>"
                  << xml_escape(r.models[mi].model) << ' ' << names[k] << " = " << fixed(vals[k], 3)
                  << "</title></rect>\n";
            }
            s << "<text x=\"" << fixed(gx + 2 * kBar, 1) << "\" y=\"" << fixed(kTop + kPlotH + 16, 1)
              << "\" text-anchor=\"middle\">" << xml_escape(r.models[mi].model) << "</text>\n";
        }
        s << "<line class=\"reference-line\" x1=\"" << fixed(plot_x, 1) << "\" y1=\"" << fixed(ypix(1.0), 2)
          << "\" x2=\"" << fixed(plot_x + plot_w, 1) << "\" y2=\"" << fixed(ypix(1.0), 2)
          << "\" stroke=\"red\" stroke-width=\"1.5\" stroke-dasharray=\"5 3\"/>\n";
        s << "</g>\n";
        x0 += panel_w[pi];
    }
    s << "</svg>\n";
    return s.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ostringstream suffix;
    suffix << ".tmp." << std::this_thread::get_id();
    auto tmp = path;
    tmp += suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) throw DataError("WriteFailed", "cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::vector<std::filesystem::path> write_outputs(const BenchmarkReport& report,
                                                 const std::filesystem::path& output_dir) {
    const std::vector<std::filesystem::path> paths{output_dir / "report.json", output_dir / "scores.csv",
                                                   output_dir / "chart.svg"};
    write_file_atomic(paths[0], canonical_report_text(report));
    write_file_atomic(paths[1], scores_csv(report));
    write_file_atomic(paths[2], chart_svg({report}));
    return paths;
}

}  // namespace discern
