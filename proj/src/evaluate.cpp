#include "discern/evaluate.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <istream>
#include <map>
#include <ostream>

#include <nlohmann/json.hpp>

#include "discern/diagnostics.hpp"
#include "discern/error.hpp"
#include "discern/provider.hpp"

namespace discern {

using json = nlohmann::json;

namespace {

bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::optional<double> try_parse_score(std::string_view text, double scale_min, double scale_max) {
    std::size_t i = 0;
    while (i < text.size()) {
        if (!is_digit(text[i])) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < text.size() && is_digit(text[i])) ++i;
        if (i + 1 < text.size() && text[i] == '.' && is_digit(text[i + 1])) {
            ++i;
            while (i < text.size() && is_digit(text[i])) ++i;
        }
        double v = 0;
        const auto [ptr, ec] = std::from_chars(text.data() + start, text.data() + i, v);
        if (ec != std::errc{}) continue;
        const bool negative = start > 0 && text[start - 1] == '-' && (start < 2 || !is_digit(text[start - 2]));
        if (negative) v = -v;
        if (v >= scale_min && v <= scale_max) return v;
    }
    return std::nullopt;
}

double parse_score(std::string_view text, double scale_min, double scale_max) {
    if (auto v = try_parse_score(text, scale_min, scale_max)) return *v;
    std::string excerpt(text.substr(0, 80));
    throw DataError("NoScoreFound", "NoScoreFound: no score in [" + std::to_string(scale_min) + ", " +
                                        std::to_string(scale_max) + "] in reply '" + excerpt + "'");
}

std::string repeat_tag(std::size_t r, bool retry) {
    auto tag = "rep=" + std::to_string(r);
    if (retry) tag += "|retry=1";
    return tag;
}

ScoreMatrix score_variant(const VariantCorpus& variant, const Corpus& corpus, const PromptTemplate& tmpl,
                          ChatClient& provider, std::size_t repeats, Diagnostics& diag) {
    if (repeats == 0) throw ConfigError("repeats must be at least 1", "InvalidConfig");
    const auto& metrics = metrics_for(corpus.task);
    if (std::find(metrics.begin(), metrics.end(), tmpl.metric) == metrics.end()) {
        throw ConfigError("metric '" + tmpl.metric + "' is not evaluated for " + std::string(to_string(corpus.task)),
                          "UnknownMetric");
    }
    check_variant(variant, corpus);

    const auto n = corpus.size();
    ScoreMatrix m;
    m.pid = variant.pid;
    m.metric = tmpl.metric;
    m.scale_min = tmpl.scale_min;
    m.scale_max = tmpl.scale_max;
    m.repeats = repeats;
    m.ids.reserve(n);
    for (const auto& dp : corpus.datapoints) m.ids.push_back(dp.id);
    m.values.assign(n, std::vector<std::optional<double>>(repeats));
    m.raw.assign(n, std::vector<std::optional<std::string>>(repeats));

    // Prompts are rendered once per row; cells fan out over (row, repeat).
    std::vector<std::optional<std::string>> prompts(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& dp = corpus.datapoints[i];
        auto it = variant.texts.find(dp.id);
        if (it == variant.texts.end()) continue;
        prompts[i] = render_prompt(tmpl, prompt_fields(corpus.task, dp, it->second));
    }

    std::vector<std::string> cell_warnings(n * repeats);
    auto run_cell = [&](std::size_t cell) {
        const auto row = cell / repeats;
        const auto rep = cell % repeats;
        if (!prompts[row]) return;
        ChatRequest req;
        req.model = provider.config().model;
        req.user = *prompts[row];
        req.temperature = 0.0;
        try {
            for (bool retry : {false, true}) {
                req.tag = repeat_tag(rep, retry);
                auto resp = provider.complete(req);
                m.raw[row][rep] = resp.text;
                if (auto s = try_parse_score(resp.text, tmpl.scale_min, tmpl.scale_max)) {
                    m.values[row][rep] = *s;
                    return;
                }
            }
            cell_warnings[cell] = "no score in reply after one re-ask";
        } catch (const AuthError&) {
            throw;
        } catch (const ProviderError& e) {
            cell_warnings[cell] = std::string("provider failure: ") + e.what();
        }
    };
    parallel_for(n * repeats, provider.config().max_concurrency, run_cell);

    std::size_t scored_rows = 0;
    std::size_t hole_rows = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!prompts[i]) continue;
        ++scored_rows;
        bool hole = false;
        for (std::size_t r = 0; r < repeats; ++r) {
            const auto& w = cell_warnings[i * repeats + r];
            if (w.empty()) continue;
            hole = true;
            diag.warn("evaluate", m.pid + "/" + m.metric + "/" + m.ids[i] + " " + repeat_tag(r) + ": " + w);
        }
        if (hole) ++hole_rows;
    }
    if (scored_rows > 0 && hole_rows * 5 > scored_rows) {
        throw DataError("VariantUnusable", "VariantUnusable: " + std::to_string(hole_rows) + " of " +
                                               std::to_string(scored_rows) + " rows of " + m.pid + "/" +
                                               m.metric + " have no usable score");
    }
    return m;
}

ScoreSet average_repeats(const ScoreMatrix& m) {
    ScoreSet s;
    s.pid = m.pid;
    s.metric = m.metric;
    s.ids = m.ids;
    s.scores.reserve(m.values.size());
    for (const auto& row : m.values) {
        std::optional<double> mean;
        if (!row.empty()) {
            double sum = 0;
            bool hole = false;
            for (const auto& v : row) {
                if (!v) {
                    hole = true;
                    break;
                }
                sum += *v;
            }
            if (!hole) mean = sum / static_cast<double>(row.size());
        }
        s.scores.push_back(mean);
    }
    return s;
}

void write_score_matrix(const ScoreMatrix& m, std::ostream& out) {
    for (std::size_t i = 0; i < m.ids.size(); ++i) {
        for (std::size_t r = 0; r < m.repeats; ++r) {
            const auto& raw = m.raw[i][r];
            const auto& v = m.values[i][r];
            json rec{{"pid", m.pid},
                     {"metric", m.metric},
                     {"id", m.ids[i]},
                     {"repeat", r},
                     {"raw_text", raw ? json(*raw) : json(nullptr)},
                     {"score", v ? json(*v) : json(nullptr)}};
            out << rec.dump() << '\n';
        }
    }
}

ScoreMatrix read_score_matrix(std::istream& in, int scale_min, int scale_max, std::string_view source) {
    ScoreMatrix m;
    m.scale_min = scale_min;
    m.scale_max = scale_max;
    std::map<std::string, std::size_t> row_of;
    std::string line;
    std::size_t lineno = 0;
    auto bad = [&](const std::string& msg) {
        return DataError("MalformedLine", std::string(source) + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw bad(e.what());
        }
        try {
            const auto pid = rec.at("pid").get<std::string>();
            const auto metric = rec.at("metric").get<std::string>();
            if (m.ids.empty()) {
                m.pid = pid;
                m.metric = metric;
            } else if (pid != m.pid || metric != m.metric) {
                throw bad("mixed pid/metric in one score file");
            }
            const auto id = rec.at("id").get<std::string>();
            const auto rep = rec.at("repeat").get<std::size_t>();
            auto [it, fresh] = row_of.emplace(id, m.ids.size());
            if (fresh) {
                m.ids.push_back(id);
                m.values.emplace_back();
                m.raw.emplace_back();
            }
            auto& vals = m.values[it->second];
            auto& raws = m.raw[it->second];
            if (rep >= vals.size()) {
                vals.resize(rep + 1);
                raws.resize(rep + 1);
            }
            const auto& raw = rec.at("raw_text");
            if (!raw.is_null()) raws[rep] = raw.get<std::string>();
            const auto& score = rec.at("score");
            if (!score.is_null()) vals[rep] = score.get<double>();
        } catch (const json::exception& e) {
            throw bad(e.what());
        }
    }
    for (const auto& row : m.values) m.repeats = std::max(m.repeats, row.size());
    for (auto& row : m.values) row.resize(m.repeats);
    for (auto& row : m.raw) row.resize(m.repeats);
    return m;
}

}  // namespace discern
