#include "discern/templates.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "discern/error.hpp"
#include "discern/hashing.hpp"
#include "discern/resources.hpp"

namespace discern {

namespace {

constexpr std::string_view kSuffix = "_HERE";

bool is_token_char(char c) { return std::isupper(static_cast<unsigned char>(c)) || c == '_'; }

/// Finds "*_HERE" tokens: maximal runs of [A-Z_] ending in _HERE.
struct Token {
    std::size_t pos;
    std::size_t len;
};

std::vector<Token> scan_tokens(std::string_view body) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < body.size()) {
        if (!is_token_char(body[i])) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < body.size() && is_token_char(body[i])) ++i;
        const auto word = body.substr(start, i - start);
        if (word.size() > kSuffix.size() && word.ends_with(kSuffix)) tokens.push_back({start, i - start});
    }
    return tokens;
}

bool registered(std::string_view token) {
    const auto& reg = placeholder_registry();
    return std::find(reg.begin(), reg.end(), token) != reg.end();
}

std::string metric_of(const std::string& id) {
    if (id.starts_with("perturb.")) return {};
    const auto dot = id.find('.');
    return dot == std::string::npos ? std::string{} : id.substr(dot + 1);
}

}  // namespace

const std::vector<std::string>& placeholder_registry() {
    static const std::vector<std::string> reg{"ARTICLE_HERE",  "SUMMARY_HERE",   "STORY_HERE",
                                              "ENDING_HERE",   "QUESTION_HERE",  "PARAGRAPH_HERE",
                                              "ANSWER_HERE",   "SOURCE_HERE",    "TRANSLATION_HERE"};
    return reg;
}

std::vector<std::string> PromptTemplate::placeholders() const {
    std::vector<std::string> out;
    for (const auto& t : scan_tokens(body)) {
        std::string tok = body.substr(t.pos, t.len);
        if (registered(tok) && std::find(out.begin(), out.end(), tok) == out.end()) {
            out.push_back(std::move(tok));
        }
    }
    return out;
}

void validate_template(const PromptTemplate& tmpl) {
    if (tmpl.scale_min >= tmpl.scale_max) {
        throw ConfigError("template '" + tmpl.template_id + "': scale_min must be below scale_max",
                          "InvalidTemplate");
    }
    bool any = false;
    for (const auto& t : scan_tokens(tmpl.body)) {
        const auto tok = tmpl.body.substr(t.pos, t.len);
        if (!registered(tok)) {
            throw ConfigError("template '" + tmpl.template_id + "': unknown placeholder " + tok,
                              "InvalidTemplate");
        }
        any = true;
    }
    if (!any) {
        throw ConfigError("template '" + tmpl.template_id + "' has no placeholder", "InvalidTemplate");
    }
}

std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& fields) {
    std::string out;
    out.reserve(tmpl.body.size() * 2);
    std::size_t cursor = 0;
    for (const auto& t : scan_tokens(tmpl.body)) {
        const auto tok = tmpl.body.substr(t.pos, t.len);
        if (!registered(tok)) continue;
        auto it = fields.find(tok);
        if (it == fields.end()) {
            throw ConfigError("MissingPlaceholder(" + tok + ") in template '" + tmpl.template_id + "'",
                              "MissingPlaceholder");
        }
        out.append(tmpl.body, cursor, t.pos - cursor);
        out += it->second;
        cursor = t.pos + t.len;
    }
    out.append(tmpl.body, cursor, std::string::npos);
    return out;
}

std::string_view evaluated_slot(TaskKind task) {
    switch (task) {
        case TaskKind::summarization: return "SUMMARY_HERE";
        case TaskKind::story_completion: return "ENDING_HERE";
        case TaskKind::question_answering: return "ANSWER_HERE";
        case TaskKind::translation: return "TRANSLATION_HERE";
    }
    return "SUMMARY_HERE";
}

std::map<std::string, std::string> prompt_fields(TaskKind task, const Datapoint& dp,
                                                 std::string_view evaluated) {
    std::map<std::string, std::string> f;
    f.emplace(std::string(evaluated_slot(task)), std::string(evaluated));
    switch (task) {
        case TaskKind::summarization: f.emplace("ARTICLE_HERE", dp.context); break;
        case TaskKind::story_completion: f.emplace("STORY_HERE", dp.context); break;
        case TaskKind::question_answering: {
            auto [question, paragraph] = split_question_context(dp.context);
            f.emplace("QUESTION_HERE", std::move(question));
            f.emplace("PARAGRAPH_HERE", std::move(paragraph));
            break;
        }
        case TaskKind::translation: f.emplace("SOURCE_HERE", dp.context); break;
    }
    return f;
}

void TemplateStore::add(PromptTemplate tmpl) {
    validate_template(tmpl);
    auto id = tmpl.template_id;
    templates_.insert_or_assign(std::move(id), std::move(tmpl));
}

TemplateStore TemplateStore::builtin() {
    TemplateStore store;
    constexpr std::string_view prefix = "prompts/";
    for (const auto& [name, body] : embedded_resources()) {
        if (!name.starts_with(prefix) || !name.ends_with(".txt")) continue;
        PromptTemplate t;
        t.template_id = std::string(name.substr(prefix.size(), name.size() - prefix.size() - 4));
        t.body = std::string(body);
        t.metric = metric_of(t.template_id);
        store.add(std::move(t));
    }
    return store;
}

TemplateStore TemplateStore::from_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("prompts directory " + dir.string() + " does not exist", "MissingFile");
    }
    TemplateStore store;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        PromptTemplate t;
        t.template_id = entry.path().stem().string();
        t.body = ss.str();
        t.metric = metric_of(t.template_id);
        store.add(std::move(t));
    }
    return store;
}

const PromptTemplate& TemplateStore::get(const std::string& template_id) const {
    auto it = templates_.find(template_id);
    if (it == templates_.end()) {
        throw ConfigError("unknown template '" + template_id + "'", "UnknownTemplate");
    }
    return it->second;
}

const PromptTemplate& TemplateStore::evaluation(TaskKind task, const std::string& metric) const {
    return get(std::string(to_string(task)) + "." + metric);
}

bool TemplateStore::contains(const std::string& template_id) const {
    return templates_.count(template_id) != 0;
}

std::vector<std::string> TemplateStore::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : templates_) out.push_back(id);
    return out;
}

std::string TemplateStore::fingerprint() const {
    std::string all;
    for (const auto& [id, t] : templates_) {
        all += id;
        all.push_back('\0');
        all += t.body;
        all.push_back('\0');
    }
    return sha256_hex(all);
}

}  // namespace discern
