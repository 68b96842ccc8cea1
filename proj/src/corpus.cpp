#include "discern/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "discern/error.hpp"
#include "discern/rng.hpp"
#include "discern/text.hpp"

namespace discern {

using json = nlohmann::json;

std::string_view to_string(TaskKind task) {
    switch (task) {
        case TaskKind::summarization: return "summarization";
        case TaskKind::story_completion: return "story_completion";
        case TaskKind::question_answering: return "question_answering";
        case TaskKind::translation: return "translation";
    }
    return "unknown";
}

TaskKind parse_task(std::string_view name) {
    for (auto t : {TaskKind::summarization, TaskKind::story_completion,
                   TaskKind::question_answering, TaskKind::translation}) {
        if (name == to_string(t)) return t;
    }
    throw ConfigError("unknown task '" + std::string(name) + "'", "UnknownTask");
}

const std::vector<std::string>& metrics_for(TaskKind task) {
    static const std::vector<std::string> summarization{"coherence", "consistency", "fluency",
                                                        "relevance"};
    static const std::vector<std::string> story{"coherence", "consistency", "fluency"};
    static const std::vector<std::string> qa{"answer_quality"};
    static const std::vector<std::string> translation{"accuracy", "fluency"};
    switch (task) {
        case TaskKind::summarization: return summarization;
        case TaskKind::story_completion: return story;
        case TaskKind::question_answering: return qa;
        case TaskKind::translation: return translation;
    }
    return qa;
}

void validate_datapoint(const Datapoint& dp, TaskKind task) {
    if (dp.id.empty()) throw DataError("MissingField", "MissingField(id)");
    if (dp.reference.empty()) {
        throw DataError("MissingField", "MissingField(reference) for id '" + dp.id + "'");
    }
    const bool story = task == TaskKind::story_completion;
    if (story && !dp.wrong_ending) {
        throw DataError("MissingField", "MissingField(wrong_ending) for id '" + dp.id + "'");
    }
    if (!story && dp.wrong_ending) {
        throw DataError("UnexpectedField", "wrong_ending is only allowed for story_completion (id '" +
                                               dp.id + "')");
    }
}

namespace {

std::string required_string(const json& rec, const char* field) {
    auto it = rec.find(field);
    if (it == rec.end() || it->is_null()) {
        throw DataError("MissingField", std::string("MissingField(") + field + ")");
    }
    if (!it->is_string()) {
        throw DataError("MalformedRecord", std::string("field '") + field + "' must be a string");
    }
    return it->get<std::string>();
}

}  // namespace

Corpus parse_corpus(std::istream& in, TaskKind task, std::string_view source) {
    Corpus corpus;
    corpus.task = task;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::normalize_whitespace(line).empty()) continue;
        const std::string where = std::string(source) + ":" + std::to_string(line_no);
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw DataError("MalformedLine", where + ": malformed JSON (" + e.what() + ")");
        }
        if (!rec.is_object()) throw DataError("MalformedLine", where + ": record is not an object");
        try {
            Datapoint dp;
            dp.id = required_string(rec, "id");
            const auto task_name = required_string(rec, "task");
            if (task_name != to_string(task)) {
                throw DataError("TaskMismatch", "record task '" + task_name + "' but corpus task is '" +
                                                    std::string(to_string(task)) + "'");
            }
            dp.context = required_string(rec, "context");
            dp.reference = required_string(rec, "reference");
            if (auto it = rec.find("wrong_ending"); it != rec.end() && !it->is_null()) {
                if (!it->is_string()) throw DataError("MalformedRecord", "wrong_ending must be a string");
                dp.wrong_ending = it->get<std::string>();
            }
            validate_datapoint(dp, task);
            if (!ids.insert(dp.id).second) {
                throw DataError("DuplicateId", "duplicate id '" + dp.id + "'");
            }
            corpus.datapoints.push_back(std::move(dp));
        } catch (const DataError& e) {
            throw DataError(e.code(), where + ": " + e.what());
        }
    }
    if (corpus.datapoints.empty()) {
        throw DataError("EmptyCorpus", "EmptyCorpus: " + std::string(source) + " has no records");
    }
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, TaskKind task) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("Unreadable", "cannot read dataset " + path.string());
    return parse_corpus(in, task, path.string());
}

void write_corpus(const Corpus& corpus, std::ostream& out) {
    for (const auto& dp : corpus.datapoints) {
        json rec{{"id", dp.id},
                 {"task", std::string(to_string(corpus.task))},
                 {"context", dp.context},
                 {"reference", dp.reference}};
        if (dp.wrong_ending) rec["wrong_ending"] = *dp.wrong_ending;
        out << rec.dump() << '\n';
    }
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("Unwritable", "cannot write " + path.string());
    write_corpus(corpus, out);
}

Corpus filter_min_reference_chars(const Corpus& corpus, std::size_t min_chars) {
    Corpus out = corpus;
    std::erase_if(out.datapoints, [&](const Datapoint& dp) {
        return text::count_graphemes(dp.reference) <= min_chars;
    });
    if (out.datapoints.empty()) {
        throw DataError("EmptyCorpus", "EmptyCorpus: no reference exceeds " +
                                           std::to_string(min_chars) + " characters");
    }
    return out;
}

Corpus select_subset(const Corpus& corpus, std::size_t n, std::int64_t seed) {
    if (n == 0) throw DataError("InvalidSubset", "subset size must be at least 1");
    if (n > corpus.size()) {
        throw DataError("SubsetTooLarge", "SubsetTooLarge: requested " + std::to_string(n) +
                                              " of " + std::to_string(corpus.size()) + " datapoints");
    }
    auto rng = RngStream::for_item(seed, "subset", "");
    auto picked = rng.sample_distinct(corpus.size(), n);
    std::sort(picked.begin(), picked.end());

    Corpus out;
    out.task = corpus.task;
    out.language_pair = corpus.language_pair;
    out.datapoints.reserve(n);
    for (auto i : picked) out.datapoints.push_back(corpus.datapoints[i]);
    return out;
}

CorpusStats corpus_stats(const Corpus& corpus) {
    if (corpus.datapoints.empty()) throw DataError("EmptyCorpus", "EmptyCorpus: no datapoints");
    double chars = 0, words = 0, sentences = 0;
    for (const auto& dp : corpus.datapoints) {
        chars += static_cast<double>(text::count_graphemes(dp.reference));
        words += static_cast<double>(text::tokenize_words(dp.reference).size());
        sentences += static_cast<double>(text::split_sentences(dp.reference).size());
    }
    const auto n = static_cast<double>(corpus.size());
    return {chars / n, words / n, sentences / n};
}

std::pair<std::string, std::string> split_question_context(std::string_view context) {
    const auto nl = context.find('\n');
    if (nl == std::string_view::npos) return {text::normalize_whitespace(context), ""};
    return {text::normalize_whitespace(context.substr(0, nl)),
            std::string(context.substr(nl + 1))};
}

}  // namespace discern
